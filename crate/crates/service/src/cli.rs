//! Argument parsing and dispatch for the `ragdesk` binary.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ragdesk_core::retrieval::RetrieverKind;

use crate::commands::{self, CliError};
use crate::config::AppConfig;
use crate::engine::Engine;
use crate::server::{self, AppState, ServerOptions};

/// Exit code when the answer step failed and the failure notice was printed.
pub const EXIT_GENERATION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ragdesk",
    version,
    about = "Question answering over chat exports and wiki pages"
)]
pub struct Cli {
    /// Configuration file.
    #[arg(
        long,
        global = true,
        env = "RAGDESK_CONFIG",
        default_value = "ragdesk.toml"
    )]
    pub config: PathBuf,
    /// Retriever: tfidf, bm25, embedding or ensemble.
    #[arg(long, global = true)]
    pub retriever: Option<RetrieverKind>,
    /// Number of context items to keep.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Minimum cosine similarity between query and item; 0 disables.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse exports and write rendered documents.
    Ingest {
        /// Download the exports from the configured endpoints first.
        #[arg(long)]
        remote: bool,
    },
    /// Chunk, embed and publish a new store generation.
    Index,
    /// Answer one question.
    Ask {
        question: String,
        /// Print the full answer trace as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Interactive session on stdin.
    Chat,
    /// Compare retrievers against the ground-truth set.
    Eval {
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    1
                }
            };
        }
    };
    match execute(cli, input, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut cfg = AppConfig::load(&cli.config).map_err(|e| CliError::User(e.to_string()))?;
    if let Some(k) = cli.k {
        cfg.retrieval.k = k;
    }
    if let Some(t) = cli.threshold {
        cfg.retrieval.similarity_threshold = t;
    }
    if let Some(kind) = cli.retriever {
        cfg.default_retriever = kind;
    }
    cfg.validate().map_err(|e| CliError::User(e.to_string()))?;
    Ok(cfg)
}

fn execute(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_config(&cli)?;
    let io = |e: std::io::Error| CliError::Internal(e.to_string());
    let kind = cfg.default_retriever;
    match cli.command {
        Command::Ingest { remote } => {
            let s = commands::ingest(&cfg, remote)?;
            writeln!(
                out,
                "{} threads, {} pages, {} orphan replies, {} rejected rows -> {}",
                s.threads,
                s.pages,
                s.orphan_replies,
                s.row_errors,
                s.documents_path.display()
            )
            .map_err(io)?;
        }
        Command::Index => {
            let s = commands::index(&cfg)?;
            writeln!(
                out,
                "generation {}: {} items in {}",
                s.generation,
                s.item_count,
                s.generation_dir.display()
            )
            .map_err(io)?;
        }
        Command::Ask { question, json } => {
            let engine = Engine::from_config(&cfg)?;
            let trace = commands::ask(&engine, &question, kind)?;
            if json {
                serde_json::to_writer_pretty(&mut *out, &trace)
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                writeln!(out).map_err(io)?;
            } else {
                commands::print_trace(out, &trace).map_err(io)?;
            }
            if trace.error.is_some() {
                return Ok(EXIT_GENERATION_FAILED);
            }
        }
        Command::Chat => {
            let engine = Engine::from_config(&cfg)?;
            commands::chat(&engine, kind, input, out)?;
        }
        Command::Eval {
            iterations,
            ground_truth,
            output_dir,
        } => {
            let engine = Engine::from_config(&cfg)?;
            let gt = ground_truth
                .or_else(|| cfg.eval.ground_truth.clone())
                .ok_or_else(|| {
                    CliError::User("no ground truth file; pass --ground-truth or set [eval]".into())
                })?;
            let iterations = iterations.unwrap_or(cfg.eval.iterations);
            if iterations == 0 {
                return Err(CliError::User("--iterations must be at least 1".into()));
            }
            let dir = output_dir.unwrap_or_else(|| cfg.eval.output_dir.clone());
            let kinds = match cli.retriever {
                Some(k) => vec![k],
                None => RetrieverKind::ALL.to_vec(),
            };
            let extra = [("config_file".to_string(), cli.config.display().to_string())];
            let written = commands::eval(&engine, &gt, &kinds, iterations, &dir, &extra)?;
            for f in written.files {
                writeln!(out, "wrote {}", f.display()).map_err(io)?;
            }
        }
        Command::Serve { bind } => {
            let engine = Arc::new(Engine::from_config(&cfg)?);
            let bind = bind.unwrap_or_else(|| cfg.server.bind.clone());
            let state = AppState::new(engine, ServerOptions::from_config(&cfg)).map_err(io)?;
            let rt = tokio::runtime::Runtime::new().map_err(io)?;
            rt.block_on(server::serve(state, &bind)).map_err(io)?;
        }
    }
    Ok(0)
}
