use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Tfidf,
    Bm25,
    Embedding,
    /// Normalised average of BM25 and embedding scores.
    Ensemble,
}

impl RetrieverKind {
    pub const ALL: [RetrieverKind; 4] = [
        RetrieverKind::Tfidf,
        RetrieverKind::Bm25,
        RetrieverKind::Embedding,
        RetrieverKind::Ensemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RetrieverKind::Tfidf => "tfidf",
            RetrieverKind::Bm25 => "bm25",
            RetrieverKind::Embedding => "embedding",
            RetrieverKind::Ensemble => "ensemble",
        }
    }

    /// Column heading used in reports.
    pub fn label(self) -> &'static str {
        match self {
            RetrieverKind::Tfidf => "TF-IDF",
            RetrieverKind::Bm25 => "BM25",
            RetrieverKind::Embedding => "Embedding",
            RetrieverKind::Ensemble => "Ensemble",
        }
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown retriever `{0}` (expected tfidf, bm25, embedding or ensemble)")]
pub struct UnknownRetriever(pub String);

impl FromStr for RetrieverKind {
    type Err = UnknownRetriever;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tfidf" | "tf-idf" => Ok(RetrieverKind::Tfidf),
            "bm25" => Ok(RetrieverKind::Bm25),
            "embedding" | "embeddings" | "dense" => Ok(RetrieverKind::Embedding),
            "ensemble" | "hybrid" => Ok(RetrieverKind::Ensemble),
            _ => Err(UnknownRetriever(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Items handed to the prompt at most.
    pub k: usize,
    /// Items whose query cosine is not above this are dropped from the top k.
    /// Zero disables the filter.
    pub similarity_threshold: f64,
    /// Per-constituent candidates considered by the ensemble.
    pub candidate_pool: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub compression_enabled: bool,
    pub reorder_enabled: bool,
    pub ensemble_normalization: EnsembleNormalization,
}

/// Which candidate set each ensemble constituent is min-max scaled over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleNormalization {
    /// A constituent is scaled over its own top `candidate_pool` items and
    /// contributes 0 for items outside that set.
    #[default]
    CandidatePool,
    /// Both constituents are scaled over the union of the two candidate sets.
    Union,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 3,
            similarity_threshold: 0.7,
            candidate_pool: 20,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            compression_enabled: false,
            reorder_enabled: true,
            ensemble_normalization: EnsembleNormalization::default(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 || self.k > self.candidate_pool {
            return Err(format!(
                "k must be in 1..={} (candidate_pool), got {}",
                self.candidate_pool, self.k
            ));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(format!(
                "similarity_threshold must be in [0, 1], got {}",
                self.similarity_threshold
            ));
        }
        if self.bm25_k1.is_nan() || self.bm25_k1 < 0.0 {
            return Err(format!(
                "bm25_k1 must be non-negative, got {}",
                self.bm25_k1
            ));
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(format!("bm25_b must be in [0, 1], got {}", self.bm25_b));
        }
        Ok(())
    }
}
