//! Term-based scorers: TF-IDF and Okapi BM25 over the store's items.

use std::collections::{BTreeMap, HashMap};

use super::Scores;
use crate::corpus::{terms, ContextItem, VectorStore};
use crate::Scalar;

/// Per-item term frequencies and corpus document frequencies.
#[derive(Debug, Clone, Default)]
pub struct LexicalIndex {
    ids: Vec<String>,
    term_freqs: Vec<HashMap<String, u32>>,
    lengths: Vec<usize>,
    doc_freq: HashMap<String, usize>,
}

impl LexicalIndex {
    pub fn build<'a>(items: impl IntoIterator<Item = &'a ContextItem>) -> Self {
        let mut index = LexicalIndex::default();
        for item in items {
            let item_terms = terms(&item.text);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &item_terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *index.doc_freq.entry(t.clone()).or_default() += 1;
            }
            index.ids.push(item.id.clone());
            index.lengths.push(item_terms.len());
            index.term_freqs.push(tf);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn average_length(&self) -> f64 {
        if self.ids.is_empty() {
            return 0.0;
        }
        self.lengths.iter().sum::<usize>() as f64 / self.ids.len() as f64
    }

    /// `Σ_t tf(t,d) · (ln((N+1)/(df+1)) + 1)` over query tokens.
    pub fn tfidf<T: Scalar>(&self, query: &str) -> Scores<T> {
        let query_terms = terms(query);
        if query_terms.is_empty() || self.is_empty() {
            return BTreeMap::new();
        }
        let n = T::from_usize_lossy(self.len());
        let idf: Vec<T> = query_terms
            .iter()
            .map(|t| ((n + T::one()) / T::from_usize_lossy(self.doc_freq(t) + 1)).ln() + T::one())
            .collect();
        self.score_each(|tf_of| {
            query_terms.iter().zip(&idf).fold(T::zero(), |acc, (t, w)| {
                acc + T::from_usize_lossy(tf_of(t)) * *w
            })
        })
    }

    /// Okapi BM25 with `idf = ln(1 + (N − df + 0.5)/(df + 0.5))`.
    pub fn bm25<T: Scalar>(&self, query: &str, k1: f64, b: f64) -> Scores<T> {
        let query_terms = terms(query);
        if query_terms.is_empty() || self.is_empty() {
            return BTreeMap::new();
        }
        let (k1, b) = (T::from_f64_lossy(k1), T::from_f64_lossy(b));
        let half = T::from_f64_lossy(0.5);
        let n = T::from_usize_lossy(self.len());
        let avgdl = T::from_f64_lossy(self.average_length());
        let idf: Vec<T> = query_terms
            .iter()
            .map(|t| {
                let df = T::from_usize_lossy(self.doc_freq(t));
                (T::one() + (n - df + half) / (df + half)).ln()
            })
            .collect();
        let mut doc = 0usize;
        self.score_each(|tf_of| {
            let len = T::from_usize_lossy(self.lengths[doc]);
            doc += 1;
            let rel_len = if avgdl > T::zero() {
                len / avgdl
            } else {
                T::zero()
            };
            let norm = k1 * (T::one() - b + b * rel_len);
            query_terms.iter().zip(&idf).fold(T::zero(), |acc, (t, w)| {
                let tf = T::from_usize_lossy(tf_of(t));
                if tf.is_zero() {
                    acc
                } else {
                    acc + *w * tf * (k1 + T::one()) / (tf + norm)
                }
            })
        })
    }

    fn score_each<T: Scalar>(
        &self,
        mut score: impl FnMut(&dyn Fn(&str) -> usize) -> T,
    ) -> Scores<T> {
        self.ids
            .iter()
            .zip(&self.term_freqs)
            .map(|(id, tf)| {
                let tf_of = |t: &str| tf.get(t).copied().unwrap_or(0) as usize;
                (id.clone(), score(&tf_of))
            })
            .collect()
    }
}

/// TF-IDF score of every item; empty when the query has no tokens.
pub fn tfidf_scores<T: Scalar>(query: &str, store: &VectorStore<T>) -> Scores<T> {
    store.lexical().tfidf(query)
}

/// BM25 score of every item with the configured `k1` and `b`.
pub fn bm25_scores<T: Scalar>(query: &str, store: &VectorStore<T>, k1: f64, b: f64) -> Scores<T> {
    store.lexical().bm25(query, k1, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_teams, HashingEmbedder};
    use chrono::DateTime;

    fn store(texts: &[&str]) -> VectorStore<f64> {
        let items = texts
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
    fn rare_term_is_unique_argmax() {
        let s = store(&[
            "pool build",
            "pool deploy",
            "pool test",
            "pool zeppelin",
            "pool lint",
        ]);
        let scores = tfidf_scores("zeppelin pool", &s);
        let best = scores
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(best.0, "d3:0");
        assert_eq!(scores.values().filter(|v| **v == *best.1).count(), 1);
    }

    #[test]
    fn no_matching_terms_scores_zero() {
        let s = store(&["alpha", "beta"]);
        assert!(tfidf_scores::<f64>("gamma", &s).values().all(|v| *v == 0.0));
        assert!(bm25_scores::<f64>("gamma", &s, 1.2, 0.75)
            .values()
            .all(|v| *v == 0.0));
        assert!(tfidf_scores::<f64>("   ", &s).is_empty());
    }

    #[test]
    fn shorter_item_wins_at_equal_tf() {
        let s = store(&["deploy now", "deploy now please wait here", "other"]);
        let scores = bm25_scores::<f64>("deploy", &s, 1.2, 0.75);
        assert!(scores["d0:0"] > scores["d1:0"]);
    }

    #[test]
    fn saturation_as_k1_goes_to_zero() {
        let s = store(&["x x x x y", "x y z w v", "q"]);
        let scores = bm25_scores::<f64>("x", &s, 1e-12, 0.75);
        assert!((scores["d0:0"] - scores["d1:0"]).abs() < 1e-9);
    }

    #[test]
    fn empty_store_gives_empty_scores() {
        let s = VectorStore::<f64>::empty(
            crate::corpus::EmbedderSpec("x".into()),
            4,
            DateTime::from_timestamp(0, 0).unwrap(),
        );
        assert!(tfidf_scores("a", &s).is_empty());
        assert!(bm25_scores("a", &s, 1.2, 0.75).is_empty());
    }
}
