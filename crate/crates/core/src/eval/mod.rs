//! Evaluation harness: ground truth, Recall@k, answer similarity, timed
//! multi-iteration runs and report files.

mod ground_truth;
mod metrics;
mod report;
mod run;

pub use ground_truth::{
    load_ground_truth, parse_ground_truth, validate_against_store, ErrorCause, GroundTruthEntry,
    GroundTruthError, HumanGrade,
};
pub use metrics::{answer_similarity, is_hit, recall_at_k, SimilarityError};
pub use report::{parse_json_report, render_report, ReportFormat};
pub use run::{
    quantile, run_eval, run_eval_with_progress, ConfigSnapshot, EvalError, EvalRecord, EvalReport,
    EvalRun, IterationSummary, KindSummary, TimeStats,
};
