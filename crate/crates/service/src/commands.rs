//! The work behind each CLI subcommand, separated from argument parsing.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use ragdesk_core::corpus::{documents_to_items, GenerationRoot, VectorStore};
use ragdesk_core::dialogue::ChatSession;
use ragdesk_core::eval::{
    load_ground_truth, render_report, run_eval_with_progress, validate_against_store, ReportFormat,
};
use ragdesk_core::ingest::{
    clean_page, fetch_remote, parse_messages_table, parse_pages_json, parse_replies_table,
    read_pages_dir, reconcile_threads, schema, ExportKind, PiiRoster, RawPage, RemoteSource,
    RenderedDocument, RosterFile,
};
use ragdesk_core::retrieval::RetrieverKind;
use ragdesk_core::AnswerTrace;
use serde::Serialize;
use thiserror::Error;

use crate::config::AppConfig;
use crate::engine::{build_embedder, Engine, EngineError};

/// User errors exit with 1, internal ones with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::NoStore(_) | EngineError::EmbedderMismatch { .. } => {
                CliError::User(e.to_string())
            }
            EngineError::Llm(_) | EngineError::Embedder(_) => CliError::User(e.to_string()),
            EngineError::Store(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn user(e: impl std::fmt::Display) -> CliError {
    CliError::User(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub threads: usize,
    pub pages: usize,
    pub orphan_replies: usize,
    pub row_errors: usize,
    pub documents_path: PathBuf,
}

/// Parses the configured exports and writes rendered documents as JSON lines.
pub fn ingest(cfg: &AppConfig, remote: bool) -> Result<IngestSummary, CliError> {
    if remote {
        fetch_exports(cfg)?;
    }
    let ic = &cfg.ingest;
    let roster = match &ic.roster {
        Some(p) => {
            let file: RosterFile = serde_json::from_slice(&read(p)?)
                .map_err(|e| user(format!("{}: {e}", p.display())))?;
            PiiRoster::from_file(file)
        }
        None => PiiRoster::default(),
    };

    let mut summary = IngestSummary {
        documents_path: cfg.documents_path.clone(),
        ..Default::default()
    };
    let mut docs = Vec::new();

    if let Some(messages_path) = &ic.messages_csv {
        let messages = parse_messages_table(&read(messages_path)?)
            .map_err(|e| user(format!("{}: {e}", messages_path.display())))?;
        let replies = match &ic.replies_csv {
            Some(p) => Some(
                parse_replies_table(&read(p)?)
                    .map_err(|e| user(format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        for e in &messages.row_errors {
            tracing::warn!(file = %messages_path.display(), "{e}");
        }
        summary.row_errors += messages.row_errors.len();
        let reply_records = match &replies {
            Some(r) => {
                for e in &r.row_errors {
                    tracing::warn!(file = "replies", "{e}");
                }
                summary.row_errors += r.row_errors.len();
                r.records.as_slice()
            }
            None => &[],
        };
        let reconciled = reconcile_threads(&messages.records, reply_records, &roster);
        for id in &reconciled.orphans {
            tracing::warn!(reply = %id, "reply has no parent message");
        }
        summary.threads = reconciled.threads.len();
        summary.orphan_replies = reconciled.orphans.len();
        docs.extend(reconciled.threads.iter().map(RenderedDocument::from_thread));
    }

    if let Some(pages_path) = &ic.pages {
        let raw: Vec<RawPage> = if pages_path.is_dir() {
            read_pages_dir(pages_path).map_err(user)?
        } else {
            parse_pages_json(&read(pages_path)?)
                .map_err(|e| user(format!("{}: {e}", pages_path.display())))?
        };
        for page in &raw {
            match clean_page(page, &roster) {
                Ok(p) => {
                    docs.push(RenderedDocument::from_page(&p));
                    summary.pages += 1;
                }
                Err(e) => {
                    tracing::warn!(page = %page.id, "{e}");
                    summary.row_errors += 1;
                }
            }
        }
    }

    if docs.is_empty() && ic.messages_csv.is_none() && ic.pages.is_none() {
        return Err(user("no inputs configured under [ingest]"));
    }
    write_jsonl(&cfg.documents_path, &docs)?;
    Ok(summary)
}

fn fetch_exports(cfg: &AppConfig) -> Result<(), CliError> {
    let remote = cfg
        .ingest
        .remote
        .as_ref()
        .ok_or_else(|| user("--remote needs an [ingest.remote] section"))?;
    let targets = [
        (
            ExportKind::Messages,
            &remote.messages_url,
            &cfg.ingest.messages_csv,
        ),
        (
            ExportKind::Replies,
            &remote.replies_url,
            &cfg.ingest.replies_csv,
        ),
        (ExportKind::Pages, &remote.pages_url, &cfg.ingest.pages),
    ];
    for (kind, url, dest) in targets {
        let (Some(url), Some(dest)) = (url, dest) else {
            continue;
        };
        let source = RemoteSource {
            base_url: url.clone(),
            auth_token: remote.auth_token.clone(),
            kind,
        };
        let export =
            fetch_remote(&source, &remote.retry).map_err(|e| internal(format!("{url}: {e}")))?;
        let bytes = match kind {
            ExportKind::Messages => export.to_csv_bytes(&schema::MESSAGE_COLUMNS),
            ExportKind::Replies => export.to_csv_bytes(&schema::REPLY_COLUMNS),
            ExportKind::Pages => export.to_json_bytes(),
        };
        if dest.is_dir() {
            return Err(user(format!(
                "{}: remote pages are written as a JSON file, not a directory",
                dest.display()
            )));
        }
        write_file(dest, &bytes)?;
        tracing::info!(%url, items = export.items.len(), requests = export.requests, "fetched export");
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| internal(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(internal)?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn read_documents(path: &Path) -> Result<Vec<RenderedDocument>, CliError> {
    let text =
        String::from_utf8(read(path)?).map_err(|e| user(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| user(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub generation: String,
    pub item_count: usize,
    pub generation_dir: PathBuf,
}

/// Store creation time: `SOURCE_DATE_EPOCH` when set, so rebuilds can be
/// byte-identical, otherwise now.
pub fn build_timestamp(get: impl Fn(&str) -> Option<String>) -> DateTime<Utc> {
    get("SOURCE_DATE_EPOCH")
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now)
}

/// Chunks and embeds the rendered documents and publishes a new generation.
pub fn index(cfg: &AppConfig) -> Result<IndexSummary, CliError> {
    let docs = read_documents(&cfg.documents_path)?;
    let items = documents_to_items(&docs, &cfg.chunking);
    let embedder = build_embedder(&cfg.embedder)?;
    let created = build_timestamp(|k| std::env::var(k).ok());
    let store = VectorStore::build(items, embedder.as_ref(), created).map_err(internal)?;
    let root = GenerationRoot::new(&cfg.store_dir);
    let generation = root.publish(&store).map_err(internal)?;
    Ok(IndexSummary {
        generation_dir: root.generation_dir(&generation),
        generation,
        item_count: store.len(),
    })
}

/// Single-turn answer in a throwaway session.
pub fn ask(engine: &Engine, question: &str, kind: RetrieverKind) -> Result<AnswerTrace, CliError> {
    let snapshot = engine.store.snapshot();
    let pipeline = engine.pipeline(&snapshot.store);
    let mut session = ChatSession::new(format!("ask-{}", uuid::Uuid::new_v4()));
    pipeline
        .chat_turn(&mut session, question, kind)
        .map_err(user)
}

pub fn print_trace(out: &mut dyn Write, trace: &AnswerTrace) -> std::io::Result<()> {
    writeln!(out, "{}", trace.answer)?;
    writeln!(out)?;
    if trace.rewrite.was_rewritten {
        writeln!(out, "rewritten query: {}", trace.rewrite.enhanced_query)?;
    }
    for s in &trace.retrieval.selected {
        writeln!(
            out,
            "context: {} (rank {}, score {:.4})",
            s.item.id, s.rank, s.score
        )?;
    }
    let t = &trace.step_timings;
    writeln!(
        out,
        "timings: rewrite {:.1} ms, retrieve {:.1} ms, prompt {:.1} ms, generate {:.1} ms",
        t.rewrite.as_secs_f64() * 1e3,
        t.retrieve.as_secs_f64() * 1e3,
        t.prompt.as_secs_f64() * 1e3,
        t.generate.as_secs_f64() * 1e3
    )?;
    writeln!(out, "trace: {}", trace.trace_id)
}

/// Reads questions line by line until EOF, `exit` or `quit`.
pub fn chat(
    engine: &Engine,
    kind: RetrieverKind,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut session = ChatSession::new(format!("chat-{}", uuid::Uuid::new_v4()));
    let io = |e: std::io::Error| internal(e);
    loop {
        write!(out, "> ").map_err(io)?;
        out.flush().map_err(io)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(io)? == 0 {
            break;
        }
        let q = line.trim();
        if q.is_empty() {
            continue;
        }
        if q == "exit" || q == "quit" {
            break;
        }
        let snapshot = engine.store.snapshot();
        let trace = engine
            .pipeline(&snapshot.store)
            .chat_turn(&mut session, q, kind)
            .map_err(user)?;
        writeln!(out, "{}\n[trace {}]", trace.answer, trace.trace_id).map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalOutputs {
    pub files: Vec<PathBuf>,
}

/// Runs the evaluation and writes `report.md`, `report.json` and `times.csv`.
pub fn eval(
    engine: &Engine,
    ground_truth: &Path,
    kinds: &[RetrieverKind],
    iterations: usize,
    output_dir: &Path,
    extra: &[(String, String)],
) -> Result<EvalOutputs, CliError> {
    let entries = load_ground_truth(ground_truth)
        .map_err(|e| user(format!("{}: {e}", ground_truth.display())))?;
    let snapshot = engine.store.snapshot();
    validate_against_store(&entries, &snapshot.store).map_err(user)?;
    let pipeline = engine.pipeline(&snapshot.store);
    let mut run = run_eval_with_progress(&entries, kinds, iterations, &pipeline, |done, total| {
        tracing::info!(done, total, "evaluation progress");
    })
    .map_err(internal)?;
    run.report
        .config
        .extra
        .insert("llm".into(), engine.llm_description.clone());
    run.report
        .config
        .extra
        .insert("store_generation".into(), snapshot.generation.clone());
    for (k, v) in extra {
        run.report.config.extra.insert(k.clone(), v.clone());
    }
    let mut files = Vec::new();
    for format in ReportFormat::ALL {
        let path = output_dir.join(format.file_name());
        write_file(&path, &render_report(&run.report, &run.records, format))?;
        files.push(path);
    }
    Ok(EvalOutputs { files })
}
