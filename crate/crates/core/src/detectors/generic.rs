use async_trait::async_trait;

use crate::agents::{Agent, AgentError};
use crate::llm::{ChatMessage, Gateway};
use crate::model::{AgentVerdict, AmbiguityCategory, Evidence, EvidenceKind, UserQuery};

pub const GENERIC_SYSTEM_PROMPT: &str = "\
SENTENCE-LEVEL AMBIGUITY CHECK
You review a single user request sent to an enterprise AI assistant and decide \
whether the sentence itself is ambiguous, independent of any product knowledge.
Categories:
CONTEXTUAL - the context or the object being referred to is underspecified.
SYNTACTIC - the sentence is malformed or incomplete, so it can be read more than one way.
ALEATORIC - a specific word is undefined or has several possible meanings.
NONE - the request is clear.
Reply with exactly one line: the category name, a colon, and a one-line reason.";

/// Reply of the generic detector, parsed from its leading category token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenericReading {
    Ambiguous(AmbiguityCategory, String),
    Clear(String),
    Unparseable(String),
}

pub fn generic_prompt(query: &UserQuery) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(GENERIC_SYSTEM_PROMPT),
        ChatMessage::user(format!("Query: {}", query.text())),
    ]
}

pub fn parse_generic_reply(reply: &str) -> GenericReading {
    let line = reply.trim_start().lines().next().unwrap_or("");
    let head_len = line
        .find(|c: char| c == ':' || c.is_whitespace())
        .unwrap_or(line.len());
    let (head, rest) = line.split_at(head_len);
    let reason = rest.trim_start_matches(|c: char| c == ':' || c.is_whitespace()).trim();
    let category = match head.to_ascii_uppercase().as_str() {
        "CONTEXTUAL" => Some(AmbiguityCategory::Contextual),
        "SYNTACTIC" => Some(AmbiguityCategory::Syntactic),
        "ALEATORIC" => Some(AmbiguityCategory::Aleatoric),
        "NONE" => return GenericReading::Clear(reason.to_owned()),
        _ => None,
    };
    match category {
        Some(c) => GenericReading::Ambiguous(c, reason.to_owned()),
        None => GenericReading::Unparseable(reply.trim().to_owned()),
    }
}

/// Asks the LLM for a domain-agnostic ambiguity category.
///
/// Gateway errors are returned as agent errors so the dispatcher records a
/// failed outcome.
pub async fn detect_generic(
    agent_id: &str,
    query: &UserQuery,
    gateway: &Gateway,
) -> Result<AgentVerdict, AgentError> {
    let reply = gateway
        .complete_messages(generic_prompt(query))
        .await
        .map_err(|e| AgentError::Analysis(e.to_string()))?;
    let token_count = query.tokens().len();
    let build = |b: crate::model::EvidenceBuilder| {
        b.build(token_count).map_err(|e| AgentError::Analysis(e.to_string()))
    };
    let base = Evidence::builder(agent_id, EvidenceKind::Generic);
    match parse_generic_reply(&reply.text) {
        GenericReading::Ambiguous(category, reason) => {
            let ev = build(base.category(category).rationale(reason))?;
            AgentVerdict::detected(agent_id, ev).map_err(|e| AgentError::Analysis(e.to_string()))
        }
        GenericReading::Clear(reason) => Ok(AgentVerdict::not_detected(
            agent_id,
            Some(build(base.rationale(reason))?),
        )),
        GenericReading::Unparseable(raw) => Ok(AgentVerdict::not_detected(
            agent_id,
            Some(build(base.rationale(format!("unparseable reply: {raw}")))?),
        )),
    }
}

pub struct GenericAgent {
    id: String,
    gateway: Gateway,
}

impl GenericAgent {
    pub fn new(id: impl Into<String>, gateway: Gateway) -> Self {
        Self {
            id: id.into(),
            gateway,
        }
    }
}

#[async_trait]
impl Agent for GenericAgent {
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError> {
        detect_generic(&self.id, query, &self.gateway).await
    }
}
