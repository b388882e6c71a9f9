//! Long-lived pieces built from the config: store handle, embedder, models.

use std::sync::Arc;

use ragdesk_core::corpus::{
    Embedder, GenerationRoot, HashingEmbedder, HttpEmbedder, LoadedStore, StoreError, StoreHandle,
    VectorStore,
};
use ragdesk_core::dialogue::Pipeline;
use ragdesk_core::llm::{HttpLanguageModel, LanguageModel, PromptDialect, ScriptedModel};
use ragdesk_core::retrieval::{RetrievalConfig, RetrieverKind};
use thiserror::Error;

use crate::config::{AppConfig, EmbedderConfig, LlmConfig};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no index found under {0}; run `ragdesk index` first")]
    NoStore(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("store was built with embedder {store}, config selects {config}")]
    EmbedderMismatch { store: String, config: String },
    #[error("cannot set up language model: {0}")]
    Llm(String),
    #[error("cannot set up embedder: {0}")]
    Embedder(String),
}

pub fn build_embedder(cfg: &EmbedderConfig) -> Result<Arc<dyn Embedder<f64>>, EngineError> {
    Ok(match cfg {
        EmbedderConfig::Hashing { dimension } => Arc::new(HashingEmbedder::new(*dimension)),
        EmbedderConfig::Http(h) => Arc::new(
            HttpEmbedder::new(h.clone(), Default::default())
                .map_err(|e| EngineError::Embedder(e.to_string()))?,
        ),
    })
}

pub fn build_llm(cfg: &LlmConfig) -> Result<Arc<dyn LanguageModel>, EngineError> {
    Ok(match cfg {
        LlmConfig::Http { endpoint, retry } => Arc::new(
            HttpLanguageModel::new(endpoint.clone(), *retry)
                .map_err(|e| EngineError::Llm(e.to_string()))?,
        ),
        LlmConfig::Scripted { script, .. } => {
            Arc::new(ScriptedModel::from_file(script).map_err(EngineError::Llm)?)
        }
    })
}

/// Loaded store plus the components a chat turn needs.
pub struct Engine {
    pub generations: Option<GenerationRoot>,
    pub store: StoreHandle<f64>,
    pub embedder: Arc<dyn Embedder<f64>>,
    pub llm: Arc<dyn LanguageModel>,
    pub rewrite_llm: Arc<dyn LanguageModel>,
    pub retrieval: RetrievalConfig,
    pub dialect: PromptDialect,
    pub default_kind: RetrieverKind,
    /// Shown in health output and eval reports.
    pub llm_description: String,
}

impl Engine {
    /// Opens the current store generation and builds the models.
    pub fn from_config(cfg: &AppConfig) -> Result<Self, EngineError> {
        let root = GenerationRoot::new(&cfg.store_dir);
        let loaded = root.load_current::<f64>().map_err(|e| match e {
            StoreError::NoGeneration(p) => EngineError::NoStore(p.display().to_string()),
            other => EngineError::Store(other),
        })?;
        let embedder = build_embedder(&cfg.embedder)?;
        check_embedder(&loaded.store, embedder.as_ref())?;
        let llm = build_llm(&cfg.llm)?;
        let rewrite_llm = match &cfg.rewrite_llm {
            Some(r) => build_llm(r)?,
            None => llm.clone(),
        };
        Ok(Self {
            generations: Some(root),
            store: StoreHandle::new(loaded),
            embedder,
            llm,
            rewrite_llm,
            retrieval: cfg.retrieval.clone(),
            dialect: cfg.llm.dialect(),
            default_kind: cfg.default_retriever,
            llm_description: cfg.llm.describe(),
        })
    }

    /// An engine over an in-memory store, with one model for both steps.
    pub fn in_memory(
        store: VectorStore<f64>,
        embedder: Arc<dyn Embedder<f64>>,
        llm: Arc<dyn LanguageModel>,
        retrieval: RetrievalConfig,
    ) -> Self {
        Self {
            generations: None,
            store: StoreHandle::new(LoadedStore {
                generation: "memory".into(),
                store,
            }),
            embedder,
            rewrite_llm: llm.clone(),
            llm,
            retrieval,
            dialect: PromptDialect::default(),
            default_kind: RetrieverKind::Ensemble,
            llm_description: "in-memory".into(),
        }
    }

    pub fn pipeline<'a>(&'a self, store: &'a VectorStore<f64>) -> Pipeline<'a, f64> {
        Pipeline::new(store, self.embedder.as_ref(), self.llm.as_ref())
            .with_rewriter(self.rewrite_llm.as_ref())
            .with_retrieval(self.retrieval.clone())
            .with_dialect(self.dialect)
    }

    /// Swaps in the newest published generation; readers holding the old
    /// snapshot keep it until they finish.
    pub fn reload(&self) -> Result<(String, usize), EngineError> {
        let root = self
            .generations
            .as_ref()
            .ok_or_else(|| EngineError::NoStore("in-memory store".into()))?;
        let loaded = root.load_current::<f64>()?;
        check_embedder(&loaded.store, self.embedder.as_ref())?;
        let info = (loaded.generation.clone(), loaded.store.len());
        self.store.swap(loaded);
        Ok(info)
    }
}

fn check_embedder(
    store: &VectorStore<f64>,
    embedder: &dyn Embedder<f64>,
) -> Result<(), EngineError> {
    let m = store.manifest();
    if m.embedder != embedder.spec() || m.dimension != embedder.dimension() {
        return Err(EngineError::EmbedderMismatch {
            store: format!("{} ({} dims)", m.embedder, m.dimension),
            config: format!("{} ({} dims)", embedder.spec(), embedder.dimension()),
        });
    }
    Ok(())
}
