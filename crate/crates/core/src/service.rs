//! Conversation sessions and the query → clarify → feedback loop.
//!
//! Each session is guarded by its own async mutex, held for the whole
//! pipeline run of a turn, so turns of one session never interleave while
//! different sessions proceed independently.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::agents::{AgentDescriptor, AgentKind, AgentOutcome, OutcomeStatus};
use crate::clarifier::ClarifierError;
use crate::engine::{Engine, EngineError};
use crate::eval::{evaluate, load_dataset, EvalError, EvalReport, FewShotExample, Pipeline, PipelineKind, RunOptions};
use crate::llm::Gateway;
use crate::model::{
    validate_query, AmbiguityCategory, Choice, ClarificationQuestion, Decision, Feedback,
    ModelError, TurnId, UserQuery,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session has no turn {0}")]
    UnknownTurn(TurnId),
    #[error("invalid query: {0}")]
    Validation(#[from] ModelError),
    #[error("turn {turn_id} is {status:?}, not awaiting feedback")]
    Conflict { turn_id: TurnId, status: TurnStatus },
    #[error("choice `{0}` is not offered by this turn")]
    InvalidFeedback(String),
    #[error("turn {turn_id} failed: {message}")]
    TurnFailed { turn_id: TurnId, message: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// HTTP status class for this error.
    pub fn status_code(&self) -> u16 {
        match self {
            Self::UnknownSession(_) | Self::UnknownTurn(_) => 404,
            Self::Validation(_) | Self::InvalidFeedback(_) | Self::BadRequest(_) => 400,
            Self::Conflict { .. } => 409,
            Self::TurnFailed { .. } => 502,
            Self::Internal(_) => 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    AwaitingFeedback,
    Answered,
    Abandoned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: TurnId,
    pub query: UserQuery,
    pub outcomes: Vec<AgentOutcome>,
    pub decision: Decision,
    pub question: Option<ClarificationQuestion>,
    pub feedback: Option<Feedback>,
    pub refined_query: Option<String>,
    pub final_response: Option<String>,
    pub status: TurnStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub turns: Vec<Turn>,
}

impl SessionState {
    fn new(session_id: String) -> Self {
        Self {
            session_id,
            turns: Vec::new(),
        }
    }

    fn next_turn_id(&self) -> TurnId {
        TurnId(self.turns.last().map_or(1, |t| t.turn_id.0 + 1))
    }

    /// Feedback only on clarified turns, turn ids strictly increasing.
    pub fn check_invariants(&self) -> bool {
        let ordered = self.turns.windows(2).all(|w| w[0].turn_id < w[1].turn_id);
        let feedback_ok = self
            .turns
            .iter()
            .all(|t| t.feedback.is_none() || t.question.is_some());
        ordered && feedback_ok
    }
}

/// Per-agent summary returned with each turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSummary {
    pub agent_id: String,
    pub kind: AgentKind,
    pub status: OutcomeStatus,
    pub detected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<AmbiguityCategory>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

pub fn summarize(outcomes: &[AgentOutcome]) -> Vec<EvidenceSummary> {
    outcomes
        .iter()
        .map(|o| {
            let evidence = o.verdict.as_ref().and_then(|v| v.evidence());
            EvidenceSummary {
                agent_id: o.agent_id.clone(),
                kind: o.kind,
                status: o.status,
                detected: o.is_detected(),
                category: evidence.and_then(|e| e.category()),
                candidates: evidence
                    .map(|e| e.candidates().iter().map(|c| c.label.clone()).collect())
                    .unwrap_or_default(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TurnResponse {
    Clarification {
        turn_id: TurnId,
        question: String,
        choices: Vec<Choice>,
        evidence: Vec<EvidenceSummary>,
        decision: Decision,
    },
    Answer {
        turn_id: TurnId,
        answer: String,
        evidence: Vec<EvidenceSummary>,
        decision: Decision,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub turn_id: TurnId,
    pub refined_query: String,
    pub answer: String,
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    sessions: Vec<SessionState>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let state = Arc::new(Mutex::new(SessionState::new(id.clone())));
        self.sessions.write().expect("session map poisoned").insert(id.clone(), state);
        id
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<SessionState>>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub async fn snapshot_json(&self) -> String {
        let handles: Vec<_> = self
            .sessions
            .read()
            .expect("session map poisoned")
            .values()
            .cloned()
            .collect();
        let mut sessions = Vec::with_capacity(handles.len());
        for h in handles {
            sessions.push(h.lock().await.clone());
        }
        sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        serde_json::to_string_pretty(&Snapshot { sessions }).expect("snapshot serializes")
    }

    pub async fn save(&self, path: &Path) -> std::io::Result<()> {
        tokio::fs::write(path, self.snapshot_json().await).await
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let snapshot: Snapshot = serde_json::from_str(json)?;
        let map = snapshot
            .sessions
            .into_iter()
            .map(|s| (s.session_id.clone(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Self {
            sessions: RwLock::new(map),
        })
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Everything needed to run evaluations from the service.
#[derive(Debug, Clone)]
pub struct EvalResources {
    pub gateway: Gateway,
    pub few_shot: Option<Vec<FewShotExample>>,
    pub options: RunOptions,
}

pub struct ClarifyService {
    engine: Engine,
    store: SessionStore,
    eval: Option<EvalResources>,
    snapshot_path: Option<PathBuf>,
}

impl ClarifyService {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine,
            store: SessionStore::new(),
            eval: None,
            snapshot_path: None,
        }
    }

    pub fn with_store(mut self, store: SessionStore) -> Self {
        self.store = store;
        self
    }

    pub fn with_eval(mut self, eval: EvalResources) -> Self {
        self.eval = Some(eval);
        self
    }

    pub fn with_snapshot_path(mut self, path: PathBuf) -> Self {
        self.snapshot_path = Some(path);
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn snapshot_path(&self) -> Option<&Path> {
        self.snapshot_path.as_deref()
    }

    pub fn create_session(&self) -> String {
        self.store.create()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, ServiceError> {
        self.store
            .get(id)
            .ok_or_else(|| ServiceError::UnknownSession(id.to_owned()))
    }

    pub async fn get_session(&self, id: &str) -> Result<SessionState, ServiceError> {
        Ok(self.session(id)?.lock().await.clone())
    }

    pub fn list_agents(&self) -> Vec<AgentDescriptor> {
        self.engine.registry().descriptors().cloned().collect()
    }

    /// Runs the pipeline for a new query. A pending clarification on the
    /// session is abandoned first.
    pub async fn post_query(&self, session_id: &str, text: &str) -> Result<TurnResponse, ServiceError> {
        let handle = self.session(session_id)?;
        let query = validate_query(text)?;
        let mut session = handle.lock().await;
        for turn in session.turns.iter_mut() {
            if turn.status == TurnStatus::AwaitingFeedback {
                turn.status = TurnStatus::Abandoned;
            }
        }
        let turn_id = session.next_turn_id();
        let query = query.with_turn_id(turn_id);
        let analysis = self.engine.analyze(&query).await.map_err(|e| match e {
            EngineError::Agents(a) => ServiceError::Internal(a.to_string()),
            EngineError::Clarifier(c) => ServiceError::Internal(c.to_string()),
        })?;
        let evidence = summarize(&analysis.report.outcomes);
        let mut turn = Turn {
            turn_id,
            query,
            outcomes: analysis.report.outcomes,
            decision: analysis.decision.clone(),
            question: analysis.question,
            feedback: None,
            refined_query: None,
            final_response: None,
            status: TurnStatus::AwaitingFeedback,
            error: None,
        };
        if let Some(question) = &turn.question {
            let response = TurnResponse::Clarification {
                turn_id,
                question: question.text().to_owned(),
                choices: question.choices().to_vec(),
                evidence,
                decision: analysis.decision,
            };
            session.turns.push(turn);
            return Ok(response);
        }
        let result = self.engine.answer(turn.query.text()).await;
        let outcome = match result {
            Ok(answer) => {
                turn.status = TurnStatus::Answered;
                turn.final_response = Some(answer.clone());
                Ok(TurnResponse::Answer {
                    turn_id,
                    answer,
                    evidence,
                    decision: analysis.decision,
                })
            }
            Err(e) => {
                turn.status = TurnStatus::Failed;
                turn.error = Some(e.to_string());
                Err(ServiceError::TurnFailed {
                    turn_id,
                    message: e.to_string(),
                })
            }
        };
        session.turns.push(turn);
        outcome
    }

    /// Applies the user's answer to a pending clarification and produces
    /// the final response. A turn accepts feedback once.
    pub async fn post_feedback(
        &self,
        session_id: &str,
        turn_id: TurnId,
        feedback: Feedback,
    ) -> Result<FeedbackResponse, ServiceError> {
        let handle = self.session(session_id)?;
        let mut session = handle.lock().await;
        let turn = session
            .turns
            .iter_mut()
            .find(|t| t.turn_id == turn_id)
            .ok_or(ServiceError::UnknownTurn(turn_id))?;
        if turn.status != TurnStatus::AwaitingFeedback || turn.feedback.is_some() {
            return Err(ServiceError::Conflict {
                turn_id,
                status: turn.status,
            });
        }
        let Some(question) = &turn.question else {
            return Err(ServiceError::Conflict {
                turn_id,
                status: turn.status,
            });
        };
        let (refined, answer) = match self.engine.resolve(&turn.query, question, &feedback).await {
            Ok(r) => r,
            Err(ClarifierError::InvalidFeedback(id)) => return Err(ServiceError::InvalidFeedback(id)),
            Err(e) => return Err(ServiceError::Internal(e.to_string())),
        };
        turn.feedback = Some(feedback);
        turn.refined_query = Some(refined.clone());
        match answer {
            Ok(answer) => {
                turn.status = TurnStatus::Answered;
                turn.final_response = Some(answer.clone());
                Ok(FeedbackResponse {
                    turn_id,
                    refined_query: refined,
                    answer,
                })
            }
            Err(e) => {
                turn.status = TurnStatus::Failed;
                turn.error = Some(e.to_string());
                Err(ServiceError::TurnFailed {
                    turn_id,
                    message: e.to_string(),
                })
            }
        }
    }

    pub async fn run_eval(
        &self,
        dataset_path: &Path,
        pipeline: PipelineKind,
    ) -> Result<EvalReport, ServiceError> {
        let records = load_dataset(dataset_path).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let options = self.eval.as_ref().map(|e| e.options).unwrap_or_default();
        let runner = match pipeline {
            PipelineKind::MultiAgent => Pipeline::MultiAgent(&self.engine),
            PipelineKind::Baseline => {
                let eval = self.eval.as_ref().ok_or_else(|| {
                    ServiceError::BadRequest("baseline evaluation is not configured".into())
                })?;
                let examples = eval.few_shot.as_deref().ok_or_else(|| {
                    ServiceError::BadRequest("no few-shot examples configured".into())
                })?;
                Pipeline::Baseline {
                    gateway: &eval.gateway,
                    examples,
                }
            }
        };
        evaluate(&records, runner, options).await.map_err(|e| match e {
            EvalError::NoRecords => ServiceError::BadRequest(e.to_string()),
            other => ServiceError::Internal(other.to_string()),
        })
    }
}
