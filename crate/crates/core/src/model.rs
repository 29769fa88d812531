//! Shared domain types: queries, agent evidence, decisions, clarification
//! questions, feedback, and per-session turn history.
//!
//! Every type here is immutable once constructed. Constructors validate the
//! invariants the rest of the pipeline relies on (span ordering, unique
//! candidate ids, choice caps) so downstream code never re-checks them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Maximum accepted query length, in characters.
pub const MAX_QUERY_CHARS: usize = 4096;

/// Default number of choices offered with a clarification question.
pub const DEFAULT_CHOICE_CAP: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("query is empty after trimming")]
    EmptyQuery,
    #[error("query has {len} characters, maximum is {max}")]
    QueryTooLong { len: usize, max: usize },
    #[error("span {start}..{end} is out of bounds for {token_count} tokens")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        token_count: usize,
    },
    #[error("span {start}..{end} overlaps or precedes the previous span ending at {prev_end}")]
    SpanOrder {
        start: usize,
        end: usize,
        prev_end: usize,
    },
    #[error("duplicate candidate id `{0}`")]
    DuplicateCandidate(String),
    #[error("grounding evidence from `{0}` cannot mark a detection")]
    GroundingDetection(String),
    #[error("clarification question needs between 1 and {cap} choices, got {got}")]
    ChoiceCount { got: usize, cap: usize },
    #[error("duplicate choice id `{0}`")]
    DuplicateChoice(String),
    #[error("feedback must carry exactly one of choice_id or free_text")]
    FeedbackShape,
}

/// Lowercases `text` and splits it on every non-alphanumeric character.
///
/// Lowercasing happens before splitting: some characters lowercase into a
/// letter plus a combining mark, and splitting afterwards keeps the result
/// stable under re-tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Opaque per-session turn identifier. Strictly increasing within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct TurnId(pub u64);

impl fmt::Display for TurnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    text: String,
    normalized_tokens: Vec<String>,
    turn_id: TurnId,
}

impl UserQuery {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.normalized_tokens
    }

    pub fn turn_id(&self) -> TurnId {
        self.turn_id
    }

    pub fn with_turn_id(mut self, turn_id: TurnId) -> Self {
        self.turn_id = turn_id;
        self
    }

    /// Space-joined surface form of tokens `start..end`.
    pub fn surface(&self, start: usize, end: usize) -> String {
        self.normalized_tokens[start..end].join(" ")
    }
}

/// Trims and bounds-checks `text`, then tokenizes it.
pub fn validate_query(text: &str) -> Result<UserQuery, ModelError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ModelError::EmptyQuery);
    }
    let len = trimmed.chars().count();
    if len > MAX_QUERY_CHARS {
        return Err(ModelError::QueryTooLong {
            len,
            max: MAX_QUERY_CHARS,
        });
    }
    Ok(UserQuery {
        text: trimmed.to_owned(),
        normalized_tokens: tokenize(trimmed),
        turn_id: TurnId::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguityCategory {
    Contextual,
    Syntactic,
    Aleatoric,
}

impl AmbiguityCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Contextual => "contextual",
            Self::Syntactic => "syntactic",
            Self::Aleatoric => "aleatoric",
        }
    }
}

impl fmt::Display for AmbiguityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    Generic,
    Product,
    Entity,
    Grounding,
}

/// Token-indexed span; `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub label: String,
}

impl Candidate {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
        }
    }
}

/// One agent's finding about a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    agent_id: String,
    kind: EvidenceKind,
    category: Option<AmbiguityCategory>,
    spans: Vec<Span>,
    candidates: Vec<Candidate>,
    rationale: String,
}

impl Evidence {
    pub fn builder(agent_id: impl Into<String>, kind: EvidenceKind) -> EvidenceBuilder {
        EvidenceBuilder {
            agent_id: agent_id.into(),
            kind,
            category: None,
            spans: Vec::new(),
            candidates: Vec::new(),
            rationale: String::new(),
        }
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn kind(&self) -> EvidenceKind {
        self.kind
    }

    pub fn category(&self) -> Option<AmbiguityCategory> {
        self.category
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn rationale(&self) -> &str {
        &self.rationale
    }
}

#[derive(Debug, Clone)]
pub struct EvidenceBuilder {
    agent_id: String,
    kind: EvidenceKind,
    category: Option<AmbiguityCategory>,
    spans: Vec<Span>,
    candidates: Vec<Candidate>,
    rationale: String,
}

impl EvidenceBuilder {
    pub fn category(mut self, category: AmbiguityCategory) -> Self {
        self.category = Some(category);
        self
    }

    pub fn span(mut self, start: usize, end: usize, surface: impl Into<String>) -> Self {
        self.spans.push(Span {
            start,
            end,
            surface: surface.into(),
        });
        self
    }

    pub fn candidate(mut self, candidate: Candidate) -> Self {
        self.candidates.push(candidate);
        self
    }

    pub fn rationale(mut self, rationale: impl Into<String>) -> Self {
        self.rationale = rationale.into();
        self
    }

    /// Validates spans against a query of `token_count` tokens.
    pub fn build(self, token_count: usize) -> Result<Evidence, ModelError> {
        let mut prev_end = 0;
        for span in &self.spans {
            if span.start >= span.end || span.end > token_count {
                return Err(ModelError::SpanOutOfBounds {
                    start: span.start,
                    end: span.end,
                    token_count,
                });
            }
            if span.start < prev_end {
                return Err(ModelError::SpanOrder {
                    start: span.start,
                    end: span.end,
                    prev_end,
                });
            }
            prev_end = span.end;
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateCandidate(c.id.clone()));
            }
        }
        Ok(Evidence {
            agent_id: self.agent_id,
            kind: self.kind,
            category: self.category,
            spans: self.spans,
            candidates: self.candidates,
            rationale: self.rationale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentVerdict {
    agent_id: String,
    detected: bool,
    evidence: Option<Evidence>,
}

impl AgentVerdict {
    /// A positive detection. Grounding evidence is rejected.
    pub fn detected(agent_id: impl Into<String>, evidence: Evidence) -> Result<Self, ModelError> {
        let agent_id = agent_id.into();
        if evidence.kind == EvidenceKind::Grounding {
            return Err(ModelError::GroundingDetection(agent_id));
        }
        Ok(Self {
            agent_id,
            detected: true,
            evidence: Some(evidence),
        })
    }

    pub fn not_detected(agent_id: impl Into<String>, evidence: Option<Evidence>) -> Self {
        Self {
            agent_id: agent_id.into(),
            detected: false,
            evidence,
        }
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn is_detected(&self) -> bool {
        self.detected
    }

    pub fn evidence(&self) -> Option<&Evidence> {
        self.evidence.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClarificationLabel {
    Needed,
    NotNeeded,
}

impl ClarificationLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Needed => "needed",
            Self::NotNeeded => "not_needed",
        }
    }
}

impl fmt::Display for ClarificationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a decision fell back to `not_needed` without a usable LLM answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionFallback {
    UnparseableReply,
    GatewayFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    label: ClarificationLabel,
    rationale: String,
    llm_consulted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fallback: Option<DecisionFallback>,
}

impl Decision {
    /// Decision taken without consulting the LLM. Always `not_needed`.
    pub fn without_llm(rationale: impl Into<String>, fallback: Option<DecisionFallback>) -> Self {
        Self {
            label: ClarificationLabel::NotNeeded,
            rationale: rationale.into(),
            llm_consulted: false,
            fallback,
        }
    }

    pub fn from_llm(label: ClarificationLabel, rationale: impl Into<String>) -> Self {
        Self {
            label,
            rationale: rationale.into(),
            llm_consulted: true,
            fallback: None,
        }
    }

    pub fn unparseable(rationale: impl Into<String>) -> Self {
        Self {
            label: ClarificationLabel::NotNeeded,
            rationale: rationale.into(),
            llm_consulted: true,
            fallback: Some(DecisionFallback::UnparseableReply),
        }
    }

    pub fn label(&self) -> ClarificationLabel {
        self.label
    }

    pub fn rationale(&self) -> &str {
        &self.rationale
    }

    pub fn llm_consulted(&self) -> bool {
        self.llm_consulted
    }

    pub fn fallback(&self) -> Option<DecisionFallback> {
        self.fallback
    }
}

/// One selectable answer to a clarification question. A choice without a
/// payload asks the user to rephrase in free text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub id: String,
    pub label: String,
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationQuestion {
    text: String,
    choices: Vec<Choice>,
}

impl ClarificationQuestion {
    pub fn new(
        text: impl Into<String>,
        choices: Vec<Choice>,
        choice_cap: usize,
    ) -> Result<Self, ModelError> {
        if choices.is_empty() || choices.len() > choice_cap {
            return Err(ModelError::ChoiceCount {
                got: choices.len(),
                cap: choice_cap,
            });
        }
        let mut seen = HashSet::new();
        for c in &choices {
            if !seen.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateChoice(c.id.clone()));
            }
        }
        Ok(Self {
            text: text.into(),
            choices,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    pub fn choice(&self, id: &str) -> Option<&Choice> {
        self.choices.iter().find(|c| c.id == id)
    }
}

/// User reply to a clarification question.
///
/// On the wire this is `{"choice_id": ...}` or `{"free_text": ...}`; a body
/// with both or neither is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FeedbackWire", into = "FeedbackWire")]
pub enum Feedback {
    SelectedChoice(String),
    FreeText(String),
}

#[derive(Serialize, Deserialize)]
struct FeedbackWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    free_text: Option<String>,
}

impl TryFrom<FeedbackWire> for Feedback {
    type Error = ModelError;

    fn try_from(wire: FeedbackWire) -> Result<Self, Self::Error> {
        match (wire.choice_id, wire.free_text) {
            (Some(id), None) => Ok(Feedback::SelectedChoice(id)),
            (None, Some(text)) => Ok(Feedback::FreeText(text)),
            _ => Err(ModelError::FeedbackShape),
        }
    }
}

impl From<Feedback> for FeedbackWire {
    fn from(f: Feedback) -> Self {
        match f {
            Feedback::SelectedChoice(id) => FeedbackWire {
                choice_id: Some(id),
                free_text: None,
            },
            Feedback::FreeText(text) => FeedbackWire {
                choice_id: None,
                free_text: Some(text),
            },
        }
    }
}
