use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::baseline::{build_baseline_prompt, FewShotExample};
use super::dataset::EvalRecord;
use super::metrics::{compare, compute_metrics, DeltaTable, MetricsReport};
use super::EvalError;
use crate::decision::parse_decision_reply;
use crate::engine::Engine;
use crate::llm::Gateway;
use crate::model::{validate_query, ClarificationLabel, DecisionFallback};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    MultiAgent,
    Baseline,
}

impl PipelineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MultiAgent => "multi_agent",
            Self::Baseline => "baseline",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multi_agent" => Ok(Self::MultiAgent),
            "baseline" => Ok(Self::Baseline),
            other => Err(EvalError::UnknownPipeline(other.to_owned())),
        }
    }
}

/// What to run each record through.
#[derive(Debug, Clone, Copy)]
pub enum Pipeline<'a> {
    MultiAgent(&'a Engine),
    Baseline {
        gateway: &'a Gateway,
        examples: &'a [FewShotExample],
    },
}

impl Pipeline<'_> {
    pub fn kind(&self) -> PipelineKind {
        match self {
            Self::MultiAgent(_) => PipelineKind::MultiAgent,
            Self::Baseline { .. } => PipelineKind::Baseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Maximum records in flight.
    pub parallelism: usize,
    /// Also generate the clarification question for records predicted `needed`.
    pub with_questions: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallelism: 8,
            with_questions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordPrediction {
    pub label: ClarificationLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detected_by: Vec<String>,
    /// Set when the record fell back to `not_needed` because of a failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<String>,
    /// Excluded from reports so repeated runs serialize identically.
    #[serde(skip)]
    pub latency_ms: u64,
}

impl RecordPrediction {
    fn flagged(reason: String) -> Self {
        Self {
            label: ClarificationLabel::NotNeeded,
            question: None,
            detected_by: Vec::new(),
            flagged: Some(reason),
            latency_ms: 0,
        }
    }
}

/// Runs every record; individual failures become flagged `not_needed`
/// predictions and never abort the run.
pub async fn run_pipeline(
    records: &[EvalRecord],
    pipeline: Pipeline<'_>,
    options: RunOptions,
) -> BTreeMap<String, RecordPrediction> {
    let parallelism = options.parallelism.max(1);
    // Owned records keep the per-record futures free of higher-ranked
    // borrows, which axum handlers need to stay `Send`.
    stream::iter(records.iter().cloned())
        .map(move |record: EvalRecord| async move {
            let started = Instant::now();
            let mut prediction = match pipeline {
                Pipeline::MultiAgent(engine) => predict_multi_agent(engine, &record, options).await,
                Pipeline::Baseline { gateway, examples } => {
                    predict_baseline(gateway, examples, &record).await
                }
            };
            prediction.latency_ms = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);
            (record.id, prediction)
        })
        .buffer_unordered(parallelism)
        .collect()
        .await
}

async fn predict_multi_agent(engine: &Engine, record: &EvalRecord, options: RunOptions) -> RecordPrediction {
    let query = match validate_query(&record.query) {
        Ok(q) => q,
        Err(e) => return RecordPrediction::flagged(format!("invalid query: {e}")),
    };
    let (report, decision, question) = if options.with_questions {
        match engine.analyze(&query).await {
            Ok(a) => (a.report, a.decision, a.question.map(|q| q.text().to_owned())),
            Err(e) => return RecordPrediction::flagged(e.to_string()),
        }
    } else {
        let report = match engine.dispatch(&query).await {
            Ok(r) => r,
            Err(e) => return RecordPrediction::flagged(e.to_string()),
        };
        let decision = engine.decide(&query, &report).await;
        (report, decision, None)
    };
    let flagged = (decision.fallback() == Some(DecisionFallback::GatewayFailure))
        .then(|| decision.rationale().to_owned());
    RecordPrediction {
        label: decision.label(),
        question,
        detected_by: report.detecting().map(|o| o.agent_id.clone()).collect(),
        flagged,
        latency_ms: 0,
    }
}

async fn predict_baseline(
    gateway: &Gateway,
    examples: &[FewShotExample],
    record: &EvalRecord,
) -> RecordPrediction {
    let messages = match build_baseline_prompt(&record.query, examples) {
        Ok(m) => m,
        Err(e) => return RecordPrediction::flagged(e.to_string()),
    };
    let reply = match gateway.complete_messages(messages).await {
        Ok(c) => c.text,
        Err(e) => return RecordPrediction::flagged(format!("baseline call failed: {e}")),
    };
    match parse_decision_reply(&reply) {
        Some((label, reason)) => RecordPrediction {
            label,
            question: (label == ClarificationLabel::Needed && !reason.is_empty()).then_some(reason),
            detected_by: Vec::new(),
            flagged: None,
            latency_ms: 0,
        },
        None => RecordPrediction {
            label: ClarificationLabel::NotNeeded,
            question: None,
            detected_by: Vec::new(),
            flagged: None,
            latency_ms: 0,
        },
    }
}

/// Metrics plus per-record predictions for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pipeline: PipelineKind,
    pub metrics: MetricsReport,
    pub predictions: BTreeMap<String, RecordPrediction>,
}

impl EvalReport {
    pub fn mean_latency_ms(&self) -> f64 {
        if self.predictions.is_empty() {
            return 0.0;
        }
        let total: u64 = self.predictions.values().map(|p| p.latency_ms).sum();
        total as f64 / self.predictions.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub async fn evaluate(
    records: &[EvalRecord],
    pipeline: Pipeline<'_>,
    options: RunOptions,
) -> Result<EvalReport, EvalError> {
    let predictions = run_pipeline(records, pipeline, options).await;
    let labels: BTreeMap<String, ClarificationLabel> =
        predictions.iter().map(|(id, p)| (id.clone(), p.label)).collect();
    let metrics = compute_metrics(&labels, records)?;
    Ok(EvalReport {
        pipeline: pipeline.kind(),
        metrics,
        predictions,
    })
}

/// Compares two runs; both must cover the same record ids.
pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<DeltaTable, EvalError> {
    let ids_a: BTreeSet<&String> = a.predictions.keys().collect();
    let ids_b: BTreeSet<&String> = b.predictions.keys().collect();
    if ids_a != ids_b {
        return Err(EvalError::DatasetMismatch(format!(
            "{} ids only in the first run, {} only in the second",
            ids_a.difference(&ids_b).count(),
            ids_b.difference(&ids_a).count()
        )));
    }
    compare(&a.metrics, &b.metrics)
}
