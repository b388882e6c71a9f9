use thiserror::Error;

use super::{EvalRecord, GroundTruthEntry};
use crate::corpus::{cosine, Embedder};
use crate::Scalar;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("cannot compare an empty answer")]
    Empty,
    #[error("embedding failed: {0}")]
    Embed(String),
}

/// Whether any of the first `k` retrieved ids supports the entry.
pub fn is_hit(retrieved_ids: &[String], entry: &GroundTruthEntry, k: usize) -> bool {
    retrieved_ids
        .iter()
        .take(k)
        .any(|id| entry.supporting_item_ids.contains(id))
}

/// Percentage of `entries` with a hit among `records`. Entries without a
/// record count as misses.
pub fn recall_at_k<'r>(
    records: impl IntoIterator<Item = &'r EvalRecord>,
    entries: &[GroundTruthEntry],
    k: usize,
) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    let records: Vec<&EvalRecord> = records.into_iter().collect();
    let hits = entries
        .iter()
        .filter(|e| {
            records
                .iter()
                .any(|r| r.entry_id == e.id && is_hit(&r.retrieved_ids, e, k))
        })
        .count();
    100.0 * hits as f64 / entries.len() as f64
}

/// Embedding cosine of the two texts, with negative values raised to 0.
pub fn answer_similarity<T: Scalar, E: Embedder<T> + ?Sized>(
    generated: &str,
    reference: &str,
    embedder: &E,
) -> Result<f64, SimilarityError> {
    if generated.trim().is_empty() || reference.trim().is_empty() {
        return Err(SimilarityError::Empty);
    }
    let a = embedder
        .embed(generated)
        .map_err(|e| SimilarityError::Embed(e.to_string()))?;
    let b = embedder
        .embed(reference)
        .map_err(|e| SimilarityError::Embed(e.to_string()))?;
    let c = cosine(&a, &b).map(|c| c.to_f64_lossy()).unwrap_or(0.0);
    Ok(c.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HashingEmbedder;
    use crate::dialogue::StepTimings;
    use crate::retrieval::RetrieverKind;
    use std::time::Duration;

    fn entry(id: &str, support: &[&str]) -> GroundTruthEntry {
        GroundTruthEntry {
            id: id.into(),
            question: "q".into(),
            reference_answer: "a".into(),
            supporting_item_ids: support.iter().map(|s| s.to_string()).collect(),
            human_grade: None,
            notes: None,
            cause: None,
        }
    }

    fn record(id: &str, retrieved: &[&str]) -> EvalRecord {
        EvalRecord {
            entry_id: id.into(),
            retriever_kind: RetrieverKind::Bm25,
            iteration: 1,
            retrieved_ids: retrieved.iter().map(|s| s.to_string()).collect(),
            generated_answer: "x".into(),
            answer_similarity: 0.0,
            response_time: Duration::from_millis(1),
            step_timings: StepTimings::default(),
            hit: false,
            failure: None,
        }
    }

    #[test]
    fn recall_counts_entries() {
        let entries = [
            entry("a", &["1"]),
            entry("b", &["2"]),
            entry("c", &["3"]),
            entry("d", &["4"]),
        ];
        let records = [
            record("a", &["9", "1"]),
            record("b", &["5"]),
            record("c", &[]),
            record("d", &["8"]),
        ];
        assert_eq!(recall_at_k(&records, &entries, 3), 25.0);
        assert_eq!(recall_at_k(&records, &entries, 1), 0.0);
        let all = [
            record("a", &["1"]),
            record("b", &["2"]),
            record("c", &["3"]),
            record("d", &["4"]),
        ];
        assert_eq!(recall_at_k(&all, &entries, 3), 100.0);
        assert_eq!(recall_at_k(&all, &[], 3), 0.0);
    }

    #[test]
    fn similarity_bounds() {
        let e = HashingEmbedder::default();
        assert!(
            (answer_similarity::<f64, _>("run the job", "run the job", &e).unwrap() - 1.0).abs()
                < 1e-12
        );
        assert_eq!(
            answer_similarity::<f64, _>("", "x", &e),
            Err(SimilarityError::Empty)
        );
        let s = answer_similarity::<f64, _>("alpha beta", "gamma delta", &e).unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}
