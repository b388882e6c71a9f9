//! `ragdesk.toml`: every tunable of the engine in one file.

use std::path::{Path, PathBuf};

use ragdesk_core::corpus::{ChunkingConfig, HttpEmbedderConfig};
use ragdesk_core::llm::{LlmEndpointSpec, PromptDialect};
use ragdesk_core::net::RetryPolicy;
use ragdesk_core::retrieval::{RetrievalConfig, RetrieverKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_LLM_BASE_URL: &str = "RAGDESK_LLM_BASE_URL";
pub const ENV_LLM_AUTH_TOKEN: &str = "RAGDESK_LLM_AUTH_TOKEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    /// Root holding store generations.
    pub store_dir: PathBuf,
    /// Rendered documents written by `ingest` and read by `index`.
    pub documents_path: PathBuf,
    #[serde(default = "default_kind")]
    pub default_retriever: RetrieverKind,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
    /// Separate endpoint for query rewriting; defaults to `llm`.
    #[serde(default)]
    pub rewrite_llm: Option<LlmConfig>,
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_kind() -> RetrieverKind {
    RetrieverKind::Ensemble
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub messages_csv: Option<PathBuf>,
    pub replies_csv: Option<PathBuf>,
    /// Directory of `.html` files or a JSON array file.
    pub pages: Option<PathBuf>,
    /// JSON `{names, emails, placeholders}`.
    pub roster: Option<PathBuf>,
    pub remote: Option<RemoteConfig>,
}

/// Paginated export endpoints used by `ingest --remote`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub messages_url: Option<String>,
    pub replies_url: Option<String>,
    pub pages_url: Option<String>,
    pub auth_token: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    /// Deterministic token hashing; no server needed.
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Http(HttpEmbedderConfig),
}

fn default_dimension() -> usize {
    64
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashing {
            dimension: default_dimension(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum LlmConfig {
    Http {
        #[serde(flatten)]
        endpoint: LlmEndpointSpec,
        #[serde(default)]
        retry: RetryPolicy,
    },
    /// Canned responses from a JSON rules file.
    Scripted {
        script: PathBuf,
        #[serde(default)]
        prompt_dialect: PromptDialect,
    },
}

impl LlmConfig {
    pub fn dialect(&self) -> PromptDialect {
        match self {
            LlmConfig::Http { endpoint, .. } => endpoint.prompt_dialect,
            LlmConfig::Scripted { prompt_dialect, .. } => *prompt_dialect,
        }
    }

    /// Short human-readable description, without credentials.
    pub fn describe(&self) -> String {
        match self {
            LlmConfig::Http { endpoint, .. } => {
                format!("{} at {}", endpoint.model_name, endpoint.base_url)
            }
            LlmConfig::Scripted { script, .. } => format!("scripted ({})", script.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Idle sessions are dropped after this many seconds.
    pub session_ttl_secs: u64,
    /// Append-only JSON-lines log of chat turns.
    pub session_log: Option<PathBuf>,
    /// When set, `/api/*` except health requires this bearer token.
    pub api_token: Option<String>,
    /// Answer traces kept for `/api/traces`.
    pub trace_capacity: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            session_ttl_secs: 3600,
            session_log: None,
            api_token: None,
            trace_capacity: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ground_truth: None,
            output_dir: PathBuf::from("reports"),
            iterations: 3,
        }
    }
}

impl AppConfig {
    /// Reads the file, resolves relative paths against its directory and
    /// applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store_dir);
        fix(&mut self.documents_path);
        for p in [
            &mut self.ingest.messages_csv,
            &mut self.ingest.replies_csv,
            &mut self.ingest.pages,
            &mut self.ingest.roster,
            &mut self.server.session_log,
            &mut self.eval.ground_truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.eval.output_dir);
        for llm in std::iter::once(&mut self.llm).chain(self.rewrite_llm.as_mut()) {
            if let LlmConfig::Scripted { script, .. } = llm {
                fix(script);
            }
        }
    }

    /// Environment values win over the file for the HTTP answer endpoint.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let LlmConfig::Http { endpoint, .. } = &mut self.llm {
            if let Some(url) = get(ENV_LLM_BASE_URL).filter(|v| !v.is_empty()) {
                endpoint.base_url = url;
            }
            if let Some(token) = get(ENV_LLM_AUTH_TOKEN).filter(|v| !v.is_empty()) {
                endpoint.auth_token = Some(token);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chunking
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.retrieval.validate().map_err(ConfigError::Invalid)?;
        for llm in std::iter::once(&self.llm).chain(self.rewrite_llm.as_ref()) {
            if let LlmConfig::Http { endpoint, .. } = llm {
                endpoint.validate().map_err(ConfigError::Invalid)?;
            }
        }
        match &self.embedder {
            EmbedderConfig::Hashing { dimension: 0 } => {
                return Err(ConfigError::Invalid(
                    "embedder dimension must be positive".into(),
                ))
            }
            EmbedderConfig::Http(h) if h.dimension == 0 => {
                return Err(ConfigError::Invalid(
                    "embedder dimension must be positive".into(),
                ))
            }
            _ => {}
        }
        if self.eval.iterations == 0 {
            return Err(ConfigError::Invalid(
                "eval iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
