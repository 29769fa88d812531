use std::sync::Arc;

use serde::Serialize;

use crate::agents::{AgentError, AgentRegistry, DispatchReport};
use crate::clarifier::{self, ClarifierError};
use crate::decision::{self, default_decision_template};
use crate::llm::Gateway;
use crate::model::{ClarificationLabel, ClarificationQuestion, Decision, Feedback, UserQuery, DEFAULT_CHOICE_CAP};
use crate::template::PromptTemplate;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Agents(#[from] AgentError),
    #[error(transparent)]
    Clarifier(#[from] ClarifierError),
}

/// Result of analyzing one query: agent outcomes, the decision, and the
/// clarification question when one is needed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnAnalysis {
    pub report: DispatchReport,
    pub decision: Decision,
    pub question: Option<ClarificationQuestion>,
}

/// Per-stage gateway handles; each counts its own calls.
#[derive(Debug, Clone)]
pub struct StageGateways {
    pub decision: Gateway,
    pub question: Gateway,
    pub answer: Gateway,
}

impl StageGateways {
    pub fn from_base(base: &Gateway) -> Self {
        Self {
            decision: base.scoped(),
            question: base.scoped(),
            answer: base.scoped(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    registry: Arc<AgentRegistry>,
    gateways: StageGateways,
    decision_template: Arc<PromptTemplate>,
    question_template: Arc<PromptTemplate>,
    choice_cap: usize,
}

impl Engine {
    pub fn new(registry: AgentRegistry, gateway: &Gateway) -> Self {
        Self {
            registry: Arc::new(registry),
            gateways: StageGateways::from_base(gateway),
            decision_template: Arc::new(default_decision_template()),
            question_template: Arc::new(clarifier::default_question_template()),
            choice_cap: DEFAULT_CHOICE_CAP,
        }
    }

    pub fn with_templates(mut self, decision: PromptTemplate, question: PromptTemplate) -> Self {
        self.decision_template = Arc::new(decision);
        self.question_template = Arc::new(question);
        self
    }

    pub fn with_choice_cap(mut self, cap: usize) -> Self {
        self.choice_cap = cap.max(1);
        self
    }

    pub fn registry(&self) -> &AgentRegistry {
        &self.registry
    }

    pub fn gateways(&self) -> &StageGateways {
        &self.gateways
    }

    pub fn choice_cap(&self) -> usize {
        self.choice_cap
    }

    pub async fn dispatch(&self, query: &UserQuery) -> Result<DispatchReport, AgentError> {
        self.registry.dispatch_all(query).await
    }

    pub async fn decide(&self, query: &UserQuery, report: &DispatchReport) -> Decision {
        decision::decide(query, report, &self.gateways.decision, &self.decision_template).await
    }

    /// Dispatch, decide, and (if needed) build the clarification question.
    pub async fn analyze(&self, query: &UserQuery) -> Result<TurnAnalysis, EngineError> {
        let report = self.dispatch(query).await?;
        let decision = self.decide(query, &report).await;
        let question = if decision.label() == ClarificationLabel::Needed {
            let choices = clarifier::derive_choices(&report, self.choice_cap)?;
            Some(
                clarifier::generate_question(
                    query,
                    &report,
                    choices,
                    &self.gateways.question,
                    &self.question_template,
                )
                .await?,
            )
        } else {
            None
        };
        Ok(TurnAnalysis {
            report,
            decision,
            question,
        })
    }

    pub async fn answer(&self, refined_query: &str) -> Result<String, ClarifierError> {
        clarifier::finalize(refined_query, &self.gateways.answer).await
    }

    /// Refines the query with the user's feedback and answers it.
    pub async fn resolve(
        &self,
        query: &UserQuery,
        question: &ClarificationQuestion,
        feedback: &Feedback,
    ) -> Result<(String, Result<String, ClarifierError>), ClarifierError> {
        let refined = clarifier::refine_query(query, feedback, question)?;
        let answer = self.answer(&refined).await;
        Ok((refined, answer))
    }
}
