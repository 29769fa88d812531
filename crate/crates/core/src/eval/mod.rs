//! Evaluation of the clarification decision: labeled JSON Lines datasets,
//! the multi-agent pipeline against a ten-example few-shot baseline, and
//! per-class plus macro-averaged precision / recall / F1.

mod baseline;
mod dataset;
mod metrics;
mod runner;
mod table;

pub use baseline::{
    build_baseline_prompt, example_header, load_few_shot, parse_few_shot, FewShotExample,
    FEW_SHOT_COUNT, TARGET_MARKER,
};
pub use dataset::{load_dataset, parse_dataset, EvalRecord};
pub use metrics::{
    compare, compute_metrics, round3, ClassMetrics, ConfusionMatrix, DeltaTable, MetricsReport,
};
pub use runner::{
    compare_runs, evaluate, run_pipeline, EvalReport, Pipeline, PipelineKind, RecordPrediction,
    RunOptions,
};
pub use table::{format_delta, format_table};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("no records to score")]
    NoRecords,
    #[error("prediction ids do not match gold ids (missing: {missing:?}, extra: {extra:?})")]
    IdMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("reports cover different datasets: {0}")]
    DatasetMismatch(String),
    #[error("few-shot examples: {0}")]
    FewShot(String),
    #[error("baseline prompt needs exactly {expected} examples, got {got}")]
    FewShotCount { expected: usize, got: usize },
    #[error("unknown pipeline `{0}` (expected multi_agent or baseline)")]
    UnknownPipeline(String),
}
