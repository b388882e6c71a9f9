use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::config::{RetrievalConfig, RetrieverKind};
use super::dense::query_cosine;
use super::{ScoredItem, Scores};
use crate::corpus::{EmbeddingVector, VectorStore};
use crate::Scalar;

/// Score descending, ties by id ascending.
pub fn rank<T: Scalar>(scores: &Scores<T>) -> Vec<(String, T)> {
    let mut ranked: Vec<(String, T)> = scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub items: Vec<ScoredItem<T>>,
    pub dropped_below_threshold: usize,
}

/// Takes the `k` best-scored items, then drops those whose embedding cosine
/// to the query is not above the threshold. A threshold of 0 keeps the top k.
pub fn select_top_k<T: Scalar>(
    scores: &Scores<T>,
    kind: RetrieverKind,
    query_vector: &EmbeddingVector<T>,
    store: &VectorStore<T>,
    cfg: &RetrievalConfig,
) -> Selection<T> {
    let threshold = T::from_f64_lossy(cfg.similarity_threshold);
    let mut items = Vec::new();
    let mut dropped = 0;
    for (position, (id, score)) in rank(scores)
        .into_iter()
        .filter(|(id, _)| store.contains(id))
        .take(cfg.k)
        .enumerate()
    {
        let record = store.get(&id).expect("filtered on contains");
        let cos = query_cosine(query_vector, &record.vector);
        if cfg.similarity_threshold > 0.0 && cos <= threshold {
            dropped += 1;
            continue;
        }
        items.push(ScoredItem {
            item: record.item.clone(),
            score,
            per_retriever: BTreeMap::from([(kind, score)]),
            rank: position + 1,
            query_cosine: cos,
            compressed: false,
        });
    }
    Selection {
        items,
        dropped_below_threshold: dropped,
    }
}

/// Places ranks outside-in: 1st at the front, 2nd at the back, 3rd second
/// from the front, and so on, leaving the weakest items in the middle.
pub fn reorder_lost_in_middle<X>(items: Vec<X>) -> Vec<X> {
    let mut front = Vec::with_capacity(items.len());
    let mut back = Vec::with_capacity(items.len() / 2);
    for (i, item) in items.into_iter().enumerate() {
        if i % 2 == 0 {
            front.push(item);
        } else {
            back.push(item);
        }
    }
    front.extend(back.into_iter().rev());
    front
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_id() {
        let s: Scores<f64> = [("b", 1.0), ("a", 1.0), ("c", 2.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let ids: Vec<_> = rank(&s).into_iter().map(|(id, _)| id).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn reorder_examples() {
        assert_eq!(
            reorder_lost_in_middle(vec!['A', 'B', 'C']),
            vec!['A', 'C', 'B']
        );
        assert_eq!(
            reorder_lost_in_middle(vec!['A', 'B', 'C', 'D', 'E']),
            vec!['A', 'C', 'E', 'D', 'B']
        );
        assert_eq!(reorder_lost_in_middle(vec!['A']), vec!['A']);
        assert!(reorder_lost_in_middle(Vec::<u8>::new()).is_empty());
    }

    proptest! {
        #[test]
        fn reorder_is_permutation(xs in proptest::collection::vec(any::<u16>(), 0..40)) {
            let mut out = reorder_lost_in_middle(xs.clone());
            let mut input = xs;
            out.sort_unstable();
            input.sort_unstable();
            prop_assert_eq!(out, input);
        }
    }
}
