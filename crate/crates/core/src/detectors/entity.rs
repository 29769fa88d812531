use std::collections::HashSet;
use std::sync::Arc;

use async_trait::async_trait;
use serde::Serialize;

use super::knowledge::{Entity, EntityKb};
use crate::agents::{Agent, AgentError};
use crate::model::{AgentVerdict, AmbiguityCategory, Candidate, Evidence, EvidenceKind, UserQuery};

/// A query span that matches a KB alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanMatch {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub candidates: Vec<Arc<Entity>>,
}

/// Leftmost-longest alias matching over the query tokens.
pub fn link_entities(query: &UserQuery, kb: &EntityKb) -> Vec<SpanMatch> {
    kb.index()
        .leftmost_longest(query.tokens())
        .into_iter()
        .map(|(start, end, entities)| SpanMatch {
            start,
            end,
            surface: query.surface(start, end),
            candidates: entities.clone(),
        })
        .collect()
}

/// Detects when any linked span has two or more candidate entities.
pub fn detect_entity_ambiguity(
    agent_id: &str,
    query: &UserQuery,
    spans: &[SpanMatch],
) -> Result<AgentVerdict, AgentError> {
    let ambiguous: Vec<&SpanMatch> = spans.iter().filter(|s| s.candidates.len() >= 2).collect();
    if ambiguous.is_empty() {
        return Ok(AgentVerdict::not_detected(agent_id, None));
    }
    let mut builder = Evidence::builder(agent_id, EvidenceKind::Entity)
        .category(AmbiguityCategory::Aleatoric);
    let mut seen = HashSet::new();
    let mut notes = Vec::with_capacity(ambiguous.len());
    for span in &ambiguous {
        builder = builder.span(span.start, span.end, span.surface.clone());
        for e in &span.candidates {
            if seen.insert(e.id.as_str()) {
                builder = builder.candidate(Candidate::new(e.id.clone(), e.display_name.clone()));
            }
        }
        let options: Vec<String> = span
            .candidates
            .iter()
            .map(|e| format!("{} ({})", e.display_name, e.entity_type))
            .collect();
        notes.push(format!(
            "'{}' links to {} entities: {}",
            span.surface,
            span.candidates.len(),
            options.join(", ")
        ));
    }
    let evidence = builder
        .rationale(notes.join("; "))
        .build(query.tokens().len())
        .map_err(|e| AgentError::Analysis(e.to_string()))?;
    AgentVerdict::detected(agent_id, evidence).map_err(|e| AgentError::Analysis(e.to_string()))
}

pub struct EntityLinkingAgent {
    id: String,
    kb: Arc<EntityKb>,
}

impl EntityLinkingAgent {
    pub fn new(id: impl Into<String>, kb: Arc<EntityKb>) -> Self {
        Self { id: id.into(), kb }
    }
}

#[async_trait]
impl Agent for EntityLinkingAgent {
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError> {
        let spans = link_entities(query, &self.kb);
        detect_entity_ambiguity(&self.id, query, &spans)
    }
}
