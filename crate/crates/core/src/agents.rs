//! Agent registry and concurrent dispatch.
//!
//! Every enabled agent analyzes the query in its own task under its own
//! deadline. A failing, panicking or slow agent only affects its own outcome;
//! the report always lists agents in registration order.

use std::collections::HashSet;
use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::model::{AgentVerdict, UserQuery};

pub const DEFAULT_AGENT_TIMEOUT_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("agent `{0}` is already registered")]
    Duplicate(String),
    #[error("agent `{0}` needs a positive timeout")]
    ZeroTimeout(String),
    #[error("no agents registered")]
    EmptyRegistry,
    #[error("{0}")]
    Analysis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Detector,
    Grounding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: String,
    pub kind: AgentKind,
    pub timeout_ms: u64,
    pub enabled: bool,
}

impl AgentDescriptor {
    pub fn detector(agent_id: impl Into<String>) -> Self {
        Self {
            agent_id: agent_id.into(),
            kind: AgentKind::Detector,
            timeout_ms: DEFAULT_AGENT_TIMEOUT_MS,
            enabled: true,
        }
    }

    pub fn grounding(agent_id: impl Into<String>) -> Self {
        Self {
            kind: AgentKind::Grounding,
            ..Self::detector(agent_id)
        }
    }

    pub fn with_timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }
}

#[async_trait]
pub trait Agent: Send + Sync {
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError>;
}

/// Adapts an async closure into an [`Agent`].
pub struct FnAgent<F>(F);

pub fn agent_fn<F, Fut>(f: F) -> FnAgent<F>
where
    F: Fn(UserQuery) -> Fut + Send + Sync,
    Fut: Future<Output = Result<AgentVerdict, AgentError>> + Send,
{
    FnAgent(f)
}

#[async_trait]
impl<F, Fut> Agent for FnAgent<F>
where
    F: Fn(UserQuery) -> Fut + Send + Sync,
    Fut: Future<Output = Result<AgentVerdict, AgentError>> + Send,
{
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError> {
        (self.0)(query.clone()).await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Completed,
    Failed,
    TimedOut,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent_id: String,
    pub kind: AgentKind,
    pub status: OutcomeStatus,
    pub verdict: Option<AgentVerdict>,
    pub error_detail: Option<String>,
}

impl AgentOutcome {
    fn completed(descriptor: &AgentDescriptor, verdict: AgentVerdict) -> Self {
        Self {
            agent_id: descriptor.agent_id.clone(),
            kind: descriptor.kind,
            status: OutcomeStatus::Completed,
            verdict: Some(verdict),
            error_detail: None,
        }
    }

    fn faulted(descriptor: &AgentDescriptor, status: OutcomeStatus, detail: String) -> Self {
        Self {
            agent_id: descriptor.agent_id.clone(),
            kind: descriptor.kind,
            status,
            verdict: None,
            error_detail: Some(detail),
        }
    }

    /// Only completed verdicts count; failures and timeouts read as "not detected".
    pub fn is_detected(&self) -> bool {
        self.verdict.as_ref().is_some_and(AgentVerdict::is_detected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub outcomes: Vec<AgentOutcome>,
    /// Per-agent wall time, index-aligned with `outcomes`.
    pub wall_time_ms: Vec<u64>,
}

impl DispatchReport {
    pub fn detecting(&self) -> impl Iterator<Item = &AgentOutcome> {
        self.outcomes.iter().filter(|o| o.is_detected())
    }

    pub fn any_detected(&self) -> bool {
        self.detecting().next().is_some()
    }

    pub fn outcome(&self, agent_id: &str) -> Option<&AgentOutcome> {
        self.outcomes.iter().find(|o| o.agent_id == agent_id)
    }
}

struct Registered {
    descriptor: AgentDescriptor,
    agent: Arc<dyn Agent>,
}

#[derive(Default)]
pub struct AgentRegistry {
    agents: Vec<Registered>,
}

impl std::fmt::Debug for AgentRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.descriptors()).finish()
    }
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        descriptor: AgentDescriptor,
        agent: Arc<dyn Agent>,
    ) -> Result<(), AgentError> {
        if self.agents.iter().any(|r| r.descriptor.agent_id == descriptor.agent_id) {
            return Err(AgentError::Duplicate(descriptor.agent_id));
        }
        if descriptor.timeout_ms == 0 {
            return Err(AgentError::ZeroTimeout(descriptor.agent_id));
        }
        self.agents.push(Registered { descriptor, agent });
        Ok(())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &AgentDescriptor> {
        self.agents.iter().map(|r| &r.descriptor)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.descriptors().map(|d| d.agent_id.as_str()).collect()
    }

    /// Runs every enabled agent concurrently, each under its own deadline.
    pub async fn dispatch_all(&self, query: &UserQuery) -> Result<DispatchReport, AgentError> {
        if self.agents.is_empty() {
            return Err(AgentError::EmptyRegistry);
        }
        let query = Arc::new(query.clone());
        let runs = self
            .agents
            .iter()
            .map(|r| run_one(&r.descriptor, Arc::clone(&r.agent), Arc::clone(&query)));
        let results = futures::future::join_all(runs).await;
        let (outcomes, wall_time_ms) = results.into_iter().unzip();
        Ok(DispatchReport {
            outcomes,
            wall_time_ms,
        })
    }
}

async fn run_one(
    descriptor: &AgentDescriptor,
    agent: Arc<dyn Agent>,
    query: Arc<UserQuery>,
) -> (AgentOutcome, u64) {
    if !descriptor.enabled {
        let outcome = AgentOutcome {
            agent_id: descriptor.agent_id.clone(),
            kind: descriptor.kind,
            status: OutcomeStatus::Disabled,
            verdict: None,
            error_detail: None,
        };
        return (outcome, 0);
    }
    let started = Instant::now();
    let mut handle = tokio::spawn(async move { agent.analyze(&query).await });
    let deadline = Duration::from_millis(descriptor.timeout_ms);
    let outcome = match tokio::time::timeout(deadline, &mut handle).await {
        Ok(Ok(Ok(verdict))) => check_verdict(descriptor, verdict),
        Ok(Ok(Err(err))) => AgentOutcome::faulted(descriptor, OutcomeStatus::Failed, err.to_string()),
        Ok(Err(join_err)) => {
            let detail = if join_err.is_panic() {
                format!("agent panicked: {}", panic_message(join_err.into_panic()))
            } else {
                "agent task cancelled".to_owned()
            };
            AgentOutcome::faulted(descriptor, OutcomeStatus::Failed, detail)
        }
        Err(_) => {
            handle.abort();
            AgentOutcome::faulted(
                descriptor,
                OutcomeStatus::TimedOut,
                format!("no verdict within {} ms", descriptor.timeout_ms),
            )
        }
    };
    tracing::debug!(agent = %descriptor.agent_id, status = ?outcome.status, "agent finished");
    let elapsed = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);
    (outcome, elapsed)
}

fn check_verdict(descriptor: &AgentDescriptor, verdict: AgentVerdict) -> AgentOutcome {
    if verdict.agent_id() != descriptor.agent_id {
        return AgentOutcome::faulted(
            descriptor,
            OutcomeStatus::Failed,
            format!("verdict attributed to `{}`", verdict.agent_id()),
        );
    }
    if descriptor.kind == AgentKind::Grounding && verdict.is_detected() {
        return AgentOutcome::faulted(
            descriptor,
            OutcomeStatus::Failed,
            "grounding agent reported a detection".to_owned(),
        );
    }
    AgentOutcome::completed(descriptor, verdict)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_query, Evidence, EvidenceKind};

    fn quiet(id: &'static str) -> Arc<dyn Agent> {
        Arc::new(agent_fn(move |_q| async move { Ok(AgentVerdict::not_detected(id, None)) }))
    }

    fn loud(id: &'static str) -> Arc<dyn Agent> {
        Arc::new(agent_fn(move |q: UserQuery| async move {
            let ev = Evidence::builder(id, EvidenceKind::Generic)
                .rationale("fixture")
                .build(q.tokens().len())
                .unwrap();
            Ok(AgentVerdict::detected(id, ev).unwrap())
        }))
    }

    fn sleeper(id: &'static str, ms: u64) -> Arc<dyn Agent> {
        Arc::new(agent_fn(move |_q| async move {
            tokio::time::sleep(Duration::from_millis(ms)).await;
            Ok(AgentVerdict::not_detected(id, None))
        }))
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDescriptor::detector("a"), quiet("a")).unwrap();
        assert_eq!(
            reg.register(AgentDescriptor::detector("a"), quiet("a")),
            Err(AgentError::Duplicate("a".into()))
        );
        assert_eq!(
            reg.register(AgentDescriptor::detector("b").with_timeout_ms(0), quiet("b")),
            Err(AgentError::ZeroTimeout("b".into()))
        );
    }

    #[test]
    fn listing_keeps_registration_order() {
        let mut reg = AgentRegistry::new();
        for id in ["d", "b", "c", "a"] {
            reg.register(AgentDescriptor::detector(id), quiet("x")).unwrap();
        }
        let ids: Vec<_> = reg.descriptors().map(|d| d.agent_id.as_str()).collect();
        assert_eq!(ids, ["d", "b", "c", "a"]);
    }

    #[tokio::test]
    async fn empty_registry_is_a_config_error() {
        let q = validate_query("hi").unwrap();
        assert_eq!(
            AgentRegistry::new().dispatch_all(&q).await,
            Err(AgentError::EmptyRegistry)
        );
    }

    #[tokio::test]
    async fn disabled_agent_is_reported_not_run() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDescriptor::detector("off").disabled(), loud("off"))
            .unwrap();
        let report = reg.dispatch_all(&validate_query("hi").unwrap()).await.unwrap();
        assert_eq!(report.outcomes[0].status, OutcomeStatus::Disabled);
        assert!(!report.any_detected());
    }

    #[tokio::test]
    async fn faults_are_isolated() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDescriptor::detector("ok"), quiet("ok")).unwrap();
        reg.register(
            AgentDescriptor::detector("slow").with_timeout_ms(50),
            sleeper("slow", 2_000),
        )
        .unwrap();
        reg.register(
            AgentDescriptor::detector("err"),
            Arc::new(agent_fn(|_q| async { Err(AgentError::Analysis("boom".into())) })),
        )
        .unwrap();
        reg.register(
            AgentDescriptor::detector("panics"),
            Arc::new(agent_fn(|_q| async { panic!("kaboom") })),
        )
        .unwrap();
        reg.register(AgentDescriptor::detector("hit"), loud("hit")).unwrap();

        let started = Instant::now();
        let report = reg.dispatch_all(&validate_query("hi").unwrap()).await.unwrap();
        assert!(started.elapsed() < Duration::from_millis(1_000));

        let statuses: Vec<_> = report.outcomes.iter().map(|o| o.status).collect();
        assert_eq!(
            statuses,
            [
                OutcomeStatus::Completed,
                OutcomeStatus::TimedOut,
                OutcomeStatus::Failed,
                OutcomeStatus::Failed,
                OutcomeStatus::Completed,
            ]
        );
        assert_eq!(report.outcomes[2].error_detail.as_deref(), Some("boom"));
        assert!(report.outcomes[3].error_detail.as_ref().unwrap().contains("kaboom"));
        assert!(report.outcomes[1].error_detail.is_some());
        let detected: Vec<_> = report.detecting().map(|o| o.agent_id.as_str()).collect();
        assert_eq!(detected, ["hit"]);
    }

    #[tokio::test]
    async fn misattributed_or_grounding_detection_fails() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDescriptor::detector("mine"), quiet("someone-else"))
            .unwrap();
        reg.register(AgentDescriptor::grounding("ground"), loud("ground"))
            .unwrap();
        let report = reg.dispatch_all(&validate_query("hi").unwrap()).await.unwrap();
        assert!(report.outcomes.iter().all(|o| o.status == OutcomeStatus::Failed));
    }

    #[tokio::test]
    async fn report_order_ignores_completion_order() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDescriptor::detector("late"), sleeper("late", 60)).unwrap();
        reg.register(AgentDescriptor::detector("mid"), sleeper("mid", 30)).unwrap();
        reg.register(AgentDescriptor::detector("early"), sleeper("early", 0)).unwrap();
        let started = Instant::now();
        let report = reg.dispatch_all(&validate_query("hi").unwrap()).await.unwrap();
        // concurrent: bounded by the slowest agent, not the sum
        assert!(started.elapsed() < Duration::from_millis(500));
        let ids: Vec<_> = report.outcomes.iter().map(|o| o.agent_id.as_str()).collect();
        assert_eq!(ids, ["late", "mid", "early"]);
        assert_eq!(report.wall_time_ms.len(), 3);
    }
}
