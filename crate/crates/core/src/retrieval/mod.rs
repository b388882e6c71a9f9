//! Scoring context items against a query, top-k selection with a cosine
//! threshold, outside-in reordering and optional compression.

mod compress;
mod config;
mod dense;
mod ensemble;
mod lexical;
mod select;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compress::{compress_context, compression_prompt, NO_RELEVANT_CONTENT};
pub use config::{EnsembleNormalization, RetrievalConfig, RetrieverKind, UnknownRetriever};
pub use dense::{check_embedder, embed_query, embedding_scores, query_cosine};
pub use ensemble::{combine, ensemble_scores, EnsembleBreakdown};
pub use lexical::{bm25_scores, tfidf_scores, LexicalIndex};
pub use select::{rank, reorder_lost_in_middle, select_top_k, Selection};

use crate::corpus::{ContextItem, Embedder, VectorStore};
use crate::llm::{LanguageModel, PromptDialect};
use crate::Scalar;

/// Item id → score.
pub type Scores<T> = BTreeMap<String, T>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("query embedder {query} does not match the store's embedder {store}")]
    EmbedderMismatch { store: String, query: String },
    #[error("embedding the query failed: {0}")]
    Embed(String),
    #[error("invalid retrieval config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem<T> {
    pub item: ContextItem,
    /// Score under the retriever that produced the ranking.
    pub score: T,
    /// For the ensemble this also holds the normalised BM25 and embedding
    /// contributions.
    pub per_retriever: BTreeMap<RetrieverKind, T>,
    /// 1-based position in the score ranking, kept through reordering.
    pub rank: usize,
    pub query_cosine: T,
    #[serde(default)]
    pub compressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult<T> {
    pub query: String,
    pub kind: RetrieverKind,
    /// In prompt order.
    pub selected: Vec<ScoredItem<T>>,
    pub dropped_below_threshold: usize,
}

impl<T> RetrievalResult<T> {
    /// Selected ids in ranking order, regardless of prompt placement.
    pub fn ranked_ids(&self) -> Vec<String> {
        let mut by_rank: Vec<&ScoredItem<T>> = self.selected.iter().collect();
        by_rank.sort_by_key(|s| s.rank);
        by_rank.into_iter().map(|s| s.item.id.clone()).collect()
    }
}

/// Scores the store with `kind`, selects, then compresses and reorders as
/// configured. `llm` is only called when compression is enabled.
pub fn retrieve<T: Scalar, E: Embedder<T> + ?Sized>(
    query: &str,
    kind: RetrieverKind,
    store: &VectorStore<T>,
    cfg: &RetrievalConfig,
    embedder: &E,
    llm: &dyn LanguageModel,
    dialect: PromptDialect,
) -> Result<RetrievalResult<T>, RetrievalError> {
    cfg.validate().map_err(RetrievalError::Config)?;
    let query_vector = embed_query(query, store, embedder)?;
    let mut breakdown = None;
    let scores = match kind {
        RetrieverKind::Tfidf => store.lexical().tfidf(query),
        RetrieverKind::Bm25 => store.lexical().bm25(query, cfg.bm25_k1, cfg.bm25_b),
        RetrieverKind::Embedding => dense::cosine_scores(&query_vector, store),
        RetrieverKind::Ensemble => {
            let b = store.lexical().bm25(query, cfg.bm25_k1, cfg.bm25_b);
            let e = dense::cosine_scores(&query_vector, store);
            let parts = combine(&b, &e, cfg.candidate_pool, cfg.ensemble_normalization);
            let scores = parts.ensemble.clone();
            breakdown = Some(parts);
            scores
        }
    };
    let Selection {
        mut items,
        dropped_below_threshold,
    } = select_top_k(&scores, kind, &query_vector, store, cfg);
    if let Some(parts) = &breakdown {
        for s in &mut items {
            let id = &s.item.id;
            s.per_retriever.insert(
                RetrieverKind::Bm25,
                parts.bm25.get(id).copied().unwrap_or_else(T::zero),
            );
            s.per_retriever.insert(
                RetrieverKind::Embedding,
                parts.embedding.get(id).copied().unwrap_or_else(T::zero),
            );
        }
    }
    if cfg.compression_enabled {
        items = items
            .into_iter()
            .map(|s| compress_context(s, query, llm, dialect))
            .collect();
    }
    if cfg.reorder_enabled {
        items = reorder_lost_in_middle(items);
    }
    Ok(RetrievalResult {
        query: query.to_string(),
        kind,
        selected: items,
        dropped_below_threshold,
    })
}
