use std::collections::HashSet;
use std::sync::Arc;

use async_trait::async_trait;

use super::knowledge::ConceptLexicon;
use crate::agents::{Agent, AgentError};
use crate::model::{AgentVerdict, Candidate, Evidence, EvidenceKind, UserQuery};

const DEFINITION_CHARS: usize = 200;

/// Attaches definitions of domain terms found in the query. Never detects.
pub fn ground_concepts(
    agent_id: &str,
    query: &UserQuery,
    lexicon: &ConceptLexicon,
) -> Result<AgentVerdict, AgentError> {
    let hits = lexicon.index().leftmost_longest(query.tokens());
    let mut builder = Evidence::builder(agent_id, EvidenceKind::Grounding);
    let mut seen = HashSet::new();
    let mut notes = Vec::new();
    for (start, end, node) in hits {
        builder = builder.span(start, end, query.surface(start, end));
        if !seen.insert(node.term.as_str()) {
            continue;
        }
        builder = builder.candidate(Candidate::new(node.term.clone(), node.term.clone()));
        let definition: String = node.definition.chars().take(DEFINITION_CHARS).collect();
        let mut note = format!("{}: {}", node.term, definition);
        if !node.related.is_empty() {
            note.push_str(&format!(" (related: {})", node.related.join(", ")));
        }
        notes.push(note);
    }
    let evidence = builder
        .rationale(notes.join("; "))
        .build(query.tokens().len())
        .map_err(|e| AgentError::Analysis(e.to_string()))?;
    Ok(AgentVerdict::not_detected(agent_id, Some(evidence)))
}

pub struct ConceptGraphAgent {
    id: String,
    lexicon: Arc<ConceptLexicon>,
}

impl ConceptGraphAgent {
    pub fn new(id: impl Into<String>, lexicon: Arc<ConceptLexicon>) -> Self {
        Self {
            id: id.into(),
            lexicon,
        }
    }
}

#[async_trait]
impl Agent for ConceptGraphAgent {
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError> {
        ground_concepts(&self.id, query, &self.lexicon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::knowledge::ConceptRecord;
    use crate::model::validate_query;

    fn lexicon() -> ConceptLexicon {
        ConceptLexicon::from_records(vec![
            ConceptRecord {
                term: "XDM".into(),
                definition: "Experience Data Model, the standard schema framework. ".repeat(10),
                related: vec!["profile".into()],
            },
            ConceptRecord {
                term: "profile".into(),
                definition: "A unified view of one customer.".into(),
                related: vec![],
            },
        ])
        .unwrap()
    }

    #[test]
    fn grounds_known_terms() {
        let q = validate_query("export the xdm schema").unwrap();
        let v = ground_concepts("concepts", &q, &lexicon()).unwrap();
        assert!(!v.is_detected());
        let ev = v.evidence().unwrap();
        assert_eq!(ev.kind(), EvidenceKind::Grounding);
        assert_eq!(ev.candidates(), [Candidate::new("xdm", "xdm")]);
        assert_eq!((ev.spans()[0].start, ev.spans()[0].end), (2, 3));
        assert!(ev.rationale().starts_with("xdm: Experience Data Model"));
        assert!(ev.rationale().contains("(related: profile)"));
    }

    #[test]
    fn definitions_are_truncated() {
        let q = validate_query("xdm").unwrap();
        let v = ground_concepts("concepts", &q, &lexicon()).unwrap();
        let rationale = v.evidence().unwrap().rationale();
        let definition = rationale
            .strip_prefix("xdm: ")
            .and_then(|r| r.strip_suffix(" (related: profile)"))
            .unwrap();
        assert_eq!(definition.chars().count(), DEFINITION_CHARS);
    }

    #[test]
    fn no_terms_empty_candidates() {
        let q = validate_query("hello there").unwrap();
        let v = ground_concepts("concepts", &q, &lexicon()).unwrap();
        assert!(!v.is_detected());
        assert!(v.evidence().unwrap().candidates().is_empty());
    }

    #[test]
    fn repeated_term_yields_one_candidate() {
        let q = validate_query("profile vs profile").unwrap();
        let v = ground_concepts("concepts", &q, &lexicon()).unwrap();
        let ev = v.evidence().unwrap();
        assert_eq!(ev.spans().len(), 2);
        assert_eq!(ev.candidates().len(), 1);
    }
}
