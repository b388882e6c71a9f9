use super::{RetrievalError, Scores};
use crate::corpus::{cosine, Embedder, EmbeddingVector, VectorStore};
use crate::Scalar;

/// Fails when `embedder` is not the function the store was built with.
pub fn check_embedder<T: Scalar, E: Embedder<T> + ?Sized>(
    store: &VectorStore<T>,
    embedder: &E,
) -> Result<(), RetrievalError> {
    let manifest = store.manifest();
    let spec = embedder.spec();
    if spec != manifest.embedder || embedder.dimension() != manifest.dimension {
        return Err(RetrievalError::EmbedderMismatch {
            store: format!("{} ({} dims)", manifest.embedder, manifest.dimension),
            query: format!("{} ({} dims)", spec, embedder.dimension()),
        });
    }
    Ok(())
}

pub fn embed_query<T: Scalar, E: Embedder<T> + ?Sized>(
    query: &str,
    store: &VectorStore<T>,
    embedder: &E,
) -> Result<EmbeddingVector<T>, RetrievalError> {
    check_embedder(store, embedder)?;
    let v = embedder
        .embed(query)
        .map_err(|e| RetrievalError::Embed(e.to_string()))?;
    if v.dimension() != store.manifest().dimension {
        return Err(RetrievalError::EmbedderMismatch {
            store: format!("{} dims", store.manifest().dimension),
            query: format!("{} dims", v.dimension()),
        });
    }
    Ok(v)
}

/// Cosine, with anything involving a zero vector scoring 0.
pub fn query_cosine<T: Scalar>(query: &EmbeddingVector<T>, item: &EmbeddingVector<T>) -> T {
    cosine(query, item).unwrap_or_else(|_| T::zero())
}

pub(crate) fn cosine_scores<T: Scalar>(
    query: &EmbeddingVector<T>,
    store: &VectorStore<T>,
) -> Scores<T> {
    store
        .records()
        .map(|r| (r.item.id.clone(), query_cosine(query, &r.vector)))
        .collect()
}

/// Cosine between the embedded query and every stored vector.
pub fn embedding_scores<T: Scalar, E: Embedder<T> + ?Sized>(
    query: &str,
    store: &VectorStore<T>,
    embedder: &E,
) -> Result<Scores<T>, RetrievalError> {
    let q = embed_query(query, store, embedder)?;
    Ok(cosine_scores(&q, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_teams, HashingEmbedder};
    use chrono::DateTime;

    fn store() -> VectorStore<f64> {
        let items = ["deploy the cluster", "rotate the keys", "lunch menu today"]
            .iter()
            .enumerate()
            .flat_map(|(i, t)| split_teams(t, &format!("d{i}")))
            .collect();
        VectorStore::build(
            items,
            &HashingEmbedder::default(),
            DateTime::from_timestamp(0, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identical_text_scores_one() {
        let s = store();
        let scores = embedding_scores("rotate the keys", &s, &HashingEmbedder::default()).unwrap();
        assert!((scores["d1:0"] - 1.0).abs() < 1e-12);
        assert!(scores.values().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn other_embedder_is_rejected() {
        let s = store();
        let err = embedding_scores("x", &s, &HashingEmbedder::new(32)).unwrap_err();
        assert!(matches!(err, RetrievalError::EmbedderMismatch { .. }));
    }

    #[test]
    fn empty_query_scores_zero() {
        let s = store();
        let scores = embedding_scores("   ", &s, &HashingEmbedder::default()).unwrap();
        assert!(scores.values().all(|v| *v == 0.0));
    }
}
