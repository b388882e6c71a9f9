use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{answer_similarity, is_hit, recall_at_k};
use super::GroundTruthEntry;
use crate::corpus::EmbedderSpec;
use crate::dialogue::{ms, ChatSession, DialogueError, Pipeline, StepTimings};
use crate::llm::PromptDialect;
use crate::retrieval::{RetrievalConfig, RetrieverKind};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("no retriever kinds requested")]
    NoKinds,
    #[error("entry `{entry}`: {source}")]
    Pipeline {
        entry: String,
        source: DialogueError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub entry_id: String,
    pub retriever_kind: RetrieverKind,
    /// 1-based.
    pub iteration: usize,
    /// Selected ids in ranking order.
    pub retrieved_ids: Vec<String>,
    pub generated_answer: String,
    pub answer_similarity: f64,
    /// Submit to full answer.
    #[serde(with = "ms")]
    pub response_time: Duration,
    pub step_timings: StepTimings,
    pub hit: bool,
    /// Set when generation failed; similarity is then 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Settings an evaluation ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderSpec,
    pub store_items: usize,
    pub prompt_dialect: PromptDialect,
    /// Free-form additions from the caller, such as model names.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// Milliseconds; quartiles use linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub q1_ms: f64,
    pub q3_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl TimeStats {
    pub fn from_durations(times: &[Duration]) -> Self {
        let mut v: Vec<f64> = times.iter().map(|d| d.as_nanos() as f64 / 1e6).collect();
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        Self {
            mean_ms: v.iter().sum::<f64>() / v.len() as f64,
            median_ms: quantile(&v, 0.5),
            q1_ms: quantile(&v, 0.25),
            q3_ms: quantile(&v, 0.75),
            min_ms: v[0],
            max_ms: v[v.len() - 1],
        }
    }
}

/// `sorted` must be non-empty and ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub recall_at_k: f64,
    pub mean_answer_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: RetrieverKind,
    /// Percent, averaged over iterations.
    pub recall_at_k: f64,
    /// Percent, averaged over iterations.
    pub mean_answer_similarity: f64,
    pub per_iteration: Vec<IterationSummary>,
    pub response_time: TimeStats,
    pub failures: usize,
}

impl KindSummary {
    /// Population variance of per-iteration recall and similarity.
    pub fn cross_iteration_variance(&self) -> (f64, f64) {
        let var = |f: fn(&IterationSummary) -> f64| {
            let n = self.per_iteration.len() as f64;
            if n == 0.0 {
                return 0.0;
            }
            // shifted by the first value so identical runs give exactly 0
            let first = f(&self.per_iteration[0]);
            let mean = self.per_iteration.iter().map(|i| f(i) - first).sum::<f64>() / n;
            self.per_iteration
                .iter()
                .map(|i| (f(i) - first - mean).powi(2))
                .sum::<f64>()
                / n
        };
        (var(|i| i.recall_at_k), var(|i| i.mean_answer_similarity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub iterations: usize,
    pub entry_count: usize,
    pub timestamp: DateTime<Utc>,
    pub config: ConfigSnapshot,
    /// In the order the kinds were requested.
    pub summaries: Vec<KindSummary>,
}

impl EvalReport {
    pub fn summary(&self, kind: RetrieverKind) -> Option<&KindSummary> {
        self.summaries.iter().find(|s| s.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub report: EvalReport,
    pub records: Vec<EvalRecord>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Asks every question once per kind and iteration, each in a fresh
/// session, then aggregates per kind.
pub fn run_eval<T: Scalar>(
    entries: &[GroundTruthEntry],
    kinds: &[RetrieverKind],
    iterations: usize,
    pipeline: &Pipeline<'_, T>,
) -> Result<EvalRun, EvalError> {
    run_eval_with_progress(entries, kinds, iterations, pipeline, |_, _| {})
}

/// As [`run_eval`], calling `progress(done, total)` after each question.
pub fn run_eval_with_progress<T: Scalar>(
    entries: &[GroundTruthEntry],
    kinds: &[RetrieverKind],
    iterations: usize,
    pipeline: &Pipeline<'_, T>,
    mut progress: impl FnMut(usize, usize),
) -> Result<EvalRun, EvalError> {
    if iterations == 0 {
        return Err(EvalError::NoIterations);
    }
    if kinds.is_empty() {
        return Err(EvalError::NoKinds);
    }
    let k = pipeline.retrieval.k;
    let total = kinds.len() * iterations * entries.len();
    let mut records = Vec::with_capacity(total);
    for &kind in kinds {
        for iteration in 1..=iterations {
            for entry in entries {
                records.push(evaluate_entry(entry, kind, iteration, k, pipeline)?);
                progress(records.len(), total);
            }
        }
    }

    let summaries = kinds
        .iter()
        .map(|&kind| {
            let of_kind: Vec<&EvalRecord> = records
                .iter()
                .filter(|r| r.retriever_kind == kind)
                .collect();
            let per_iteration: Vec<IterationSummary> = (1..=iterations)
                .map(|iteration| {
                    let recs: Vec<&EvalRecord> = of_kind
                        .iter()
                        .copied()
                        .filter(|r| r.iteration == iteration)
                        .collect();
                    IterationSummary {
                        iteration,
                        recall_at_k: recall_at_k(recs.iter().copied(), entries, k),
                        mean_answer_similarity: 100.0
                            * mean(recs.iter().map(|r| r.answer_similarity)),
                    }
                })
                .collect();
            let times: Vec<Duration> = of_kind.iter().map(|r| r.response_time).collect();
            KindSummary {
                kind,
                recall_at_k: mean(per_iteration.iter().map(|i| i.recall_at_k)),
                mean_answer_similarity: mean(
                    per_iteration.iter().map(|i| i.mean_answer_similarity),
                ),
                per_iteration,
                response_time: TimeStats::from_durations(&times),
                failures: of_kind.iter().filter(|r| r.failure.is_some()).count(),
            }
        })
        .collect();

    let report = EvalReport {
        k,
        iterations,
        entry_count: entries.len(),
        timestamp: Utc::now(),
        config: ConfigSnapshot {
            retrieval: pipeline.retrieval.clone(),
            embedder: pipeline.store.manifest().embedder.clone(),
            store_items: pipeline.store.len(),
            prompt_dialect: pipeline.dialect,
            extra: BTreeMap::new(),
        },
        summaries,
    };
    Ok(EvalRun { report, records })
}

fn evaluate_entry<T: Scalar>(
    entry: &GroundTruthEntry,
    kind: RetrieverKind,
    iteration: usize,
    k: usize,
    pipeline: &Pipeline<'_, T>,
) -> Result<EvalRecord, EvalError> {
    let mut session = ChatSession::new(format!("eval-{kind}-{iteration}-{}", entry.id));
    let started = Instant::now();
    let trace = pipeline
        .chat_turn(&mut session, &entry.question, kind)
        .map_err(|source| EvalError::Pipeline {
            entry: entry.id.clone(),
            source,
        })?;
    let response_time = started.elapsed();

    let retrieved_ids = trace.retrieval.ranked_ids();
    let mut failure = trace.error.as_ref().map(|e| e.message.clone());
    let answer_similarity = if failure.is_some() {
        0.0
    } else {
        match answer_similarity(&trace.answer, &entry.reference_answer, pipeline.embedder) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e.to_string());
                0.0
            }
        }
    };
    if let Some(f) = &failure {
        tracing::warn!(entry = %entry.id, %kind, iteration, failure = %f, "evaluation entry failed");
    }
    Ok(EvalRecord {
        hit: is_hit(&retrieved_ids, entry, k),
        entry_id: entry.id.clone(),
        retriever_kind: kind,
        iteration,
        retrieved_ids,
        generated_answer: trace.answer,
        answer_similarity,
        response_time,
        step_timings: trace.step_timings,
        failure,
    })
}
