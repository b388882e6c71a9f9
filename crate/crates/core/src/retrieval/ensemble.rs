use std::collections::{BTreeMap, BTreeSet};

use super::config::{EnsembleNormalization, RetrievalConfig};
use super::dense::{cosine_scores, embed_query};
use super::select::rank;
use super::{RetrievalError, Scores};
use crate::corpus::{Embedder, VectorStore};
use crate::Scalar;

/// Constituent scores after normalisation, and their average.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBreakdown<T> {
    pub bm25: Scores<T>,
    pub embedding: Scores<T>,
    pub ensemble: Scores<T>,
}

fn candidates<T: Scalar>(scores: &Scores<T>, pool: usize, positive_only: bool) -> BTreeSet<String> {
    rank(scores)
        .into_iter()
        .filter(|(_, s)| !positive_only || *s > T::zero())
        .take(pool)
        .map(|(id, _)| id)
        .collect()
}

/// Min-max scales `scores` restricted to `over`; a constant list maps to 1.
fn min_max<T: Scalar>(scores: &Scores<T>, over: &BTreeSet<String>) -> Scores<T> {
    let values: Vec<T> = over
        .iter()
        .filter_map(|id| scores.get(id).copied())
        .collect();
    let Some(lo) = values.iter().copied().reduce(T::min) else {
        return BTreeMap::new();
    };
    let hi = values.iter().copied().fold(lo, T::max);
    let span = hi - lo;
    over.iter()
        .filter_map(|id| {
            let s = *scores.get(id)?;
            let n = if span > T::zero() {
                (s - lo) / span
            } else {
                T::one()
            };
            Some((id.clone(), n))
        })
        .collect()
}

/// Averages normalised BM25 and embedding scores over the candidate union.
/// BM25 candidates are limited to items that share a term with the query.
pub fn combine<T: Scalar>(
    bm25: &Scores<T>,
    embedding: &Scores<T>,
    pool: usize,
    normalization: EnsembleNormalization,
) -> EnsembleBreakdown<T> {
    let bm25_pool = candidates(bm25, pool, true);
    let embed_pool = candidates(embedding, pool, false);
    let union: BTreeSet<String> = bm25_pool.union(&embed_pool).cloned().collect();
    let (nb, ne) = match normalization {
        EnsembleNormalization::CandidatePool => {
            (min_max(bm25, &bm25_pool), min_max(embedding, &embed_pool))
        }
        EnsembleNormalization::Union => (min_max(bm25, &union), min_max(embedding, &union)),
    };
    let two = T::one() + T::one();
    let ensemble = union
        .iter()
        .map(|id| {
            let b = nb.get(id).copied().unwrap_or_else(T::zero);
            let e = ne.get(id).copied().unwrap_or_else(T::zero);
            (id.clone(), (b + e) / two)
        })
        .collect();
    EnsembleBreakdown {
        bm25: nb,
        embedding: ne,
        ensemble,
    }
}

pub(crate) fn ensemble_breakdown<T: Scalar, E: Embedder<T> + ?Sized>(
    query: &str,
    store: &VectorStore<T>,
    cfg: &RetrievalConfig,
    embedder: &E,
) -> Result<EnsembleBreakdown<T>, RetrievalError> {
    let q = embed_query(query, store, embedder)?;
    let bm25 = store.lexical().bm25(query, cfg.bm25_k1, cfg.bm25_b);
    let embedding = cosine_scores(&q, store);
    Ok(combine(
        &bm25,
        &embedding,
        cfg.candidate_pool,
        cfg.ensemble_normalization,
    ))
}

/// Ensemble score of every candidate; items in neither candidate pool are
/// absent from the map.
pub fn ensemble_scores<T: Scalar, E: Embedder<T> + ?Sized>(
    query: &str,
    store: &VectorStore<T>,
    cfg: &RetrievalConfig,
    embedder: &E,
) -> Result<Scores<T>, RetrievalError> {
    Ok(ensemble_breakdown(query, store, cfg, embedder)?.ensemble)
}
