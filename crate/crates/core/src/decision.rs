//! Turns the detecting agents' evidence into an LLM prompt and reads back a
//! needed / not-needed clarification decision.
//!
//! When no agent detects anything the LLM is not called at all. Any reply
//! that cannot be parsed, and any gateway failure, degrades to `not_needed`.

use crate::agents::{AgentKind, AgentOutcome, DispatchReport};
use crate::llm::{ChatMessage, Gateway};
use crate::model::{ClarificationLabel, Decision, DecisionFallback, Evidence, UserQuery};
use crate::template::{PromptTemplate, TemplateError};

pub const DECISION_SYSTEM_PROMPT: &str = "You are the clarification gate of an enterprise AI \
assistant. Several analysis agents have inspected the user's query. Weigh their evidence and \
decide whether a clarification question is required before answering. Only ask when it is \
truly needed.";

pub const DECISION_PLACEHOLDERS: &[&str] = &["query", "evidence_blocks", "grounding_blocks"];

const DEFAULT_DECISION_TEMPLATE: &str = include_str!("../templates/decision.txt");

pub const NO_DETECTION_RATIONALE: &str = "no agent detected ambiguity";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecisionError {
    #[error("evidence prompt needs at least one detecting agent")]
    NoDetections,
}

pub fn default_decision_template() -> PromptTemplate {
    PromptTemplate::new("decision.txt", DEFAULT_DECISION_TEMPLATE, DECISION_PLACEHOLDERS)
        .expect("bundled decision template is valid")
}

pub fn load_decision_template(path: &std::path::Path) -> Result<PromptTemplate, TemplateError> {
    PromptTemplate::load(path, DECISION_PLACEHOLDERS)
}

/// Header line that opens each evidence block.
pub fn evidence_header(agent_id: &str) -> String {
    format!("[agent: {agent_id}]")
}

/// Header line that opens each grounding block.
pub fn grounding_header(agent_id: &str) -> String {
    format!("[grounding: {agent_id}]")
}

fn format_evidence(header: String, evidence: Option<&Evidence>) -> String {
    let mut block = header;
    let Some(ev) = evidence else {
        return block;
    };
    let category = ev.category().map_or("unspecified", |c| c.as_str());
    block.push_str(&format!("\ncategory: {category}"));
    if !ev.spans().is_empty() {
        let spans: Vec<String> = ev
            .spans()
            .iter()
            .map(|s| format!("\"{}\" (tokens {}-{})", s.surface, s.start, s.end))
            .collect();
        block.push_str(&format!("\nspans: {}", spans.join(", ")));
    }
    if !ev.candidates().is_empty() {
        let labels: Vec<&str> = ev.candidates().iter().map(|c| c.label.as_str()).collect();
        block.push_str(&format!("\ncandidates: {}", labels.join(" | ")));
    }
    if !ev.rationale().is_empty() {
        block.push_str(&format!("\nrationale: {}", ev.rationale()));
    }
    block
}

/// One block per detecting agent, in registration order.
pub fn evidence_blocks(report: &DispatchReport) -> String {
    let blocks: Vec<String> = report
        .detecting()
        .map(|o| format_evidence(evidence_header(&o.agent_id), evidence_of(o)))
        .collect();
    join_or_none(blocks)
}

/// One block per grounding agent that matched at least one term.
pub fn grounding_blocks(report: &DispatchReport) -> String {
    let blocks: Vec<String> = report
        .outcomes
        .iter()
        .filter(|o| o.kind == AgentKind::Grounding)
        .filter_map(|o| evidence_of(o).filter(|e| !e.candidates().is_empty()).map(|e| (o, e)))
        .map(|(o, e)| format_evidence(grounding_header(&o.agent_id), Some(e)))
        .collect();
    join_or_none(blocks)
}

fn evidence_of(outcome: &AgentOutcome) -> Option<&Evidence> {
    outcome.verdict.as_ref().and_then(|v| v.evidence())
}

fn join_or_none(blocks: Vec<String>) -> String {
    if blocks.is_empty() {
        "(none)".to_owned()
    } else {
        blocks.join("\n\n")
    }
}

pub fn assemble_evidence_prompt(
    query: &UserQuery,
    report: &DispatchReport,
    template: &PromptTemplate,
) -> Result<Vec<ChatMessage>, DecisionError> {
    if !report.any_detected() {
        return Err(DecisionError::NoDetections);
    }
    let evidence = evidence_blocks(report);
    let grounding = grounding_blocks(report);
    let body = template.render(&[
        ("query", query.text()),
        ("evidence_blocks", &evidence),
        ("grounding_blocks", &grounding),
    ]);
    Ok(vec![
        ChatMessage::system(DECISION_SYSTEM_PROMPT),
        ChatMessage::user(body),
    ])
}

/// Reads a leading `NEEDED` / `NOT_NEEDED` token, case-insensitively.
pub fn parse_decision_reply(reply: &str) -> Option<(ClarificationLabel, String)> {
    let text = reply.trim_start();
    let upper = text.to_ascii_uppercase();
    let (label, len) = if upper.starts_with("NOT_NEEDED") {
        (ClarificationLabel::NotNeeded, "NOT_NEEDED".len())
    } else if upper.starts_with("NEEDED") {
        (ClarificationLabel::Needed, "NEEDED".len())
    } else {
        return None;
    };
    let rest = &text[len..];
    if !(rest.is_empty() || rest.starts_with(':') || rest.starts_with(char::is_whitespace)) {
        return None;
    }
    let reason = rest
        .trim_start_matches(|c: char| c == ':' || c.is_whitespace())
        .lines()
        .next()
        .unwrap_or("")
        .trim()
        .to_owned();
    Some((label, reason))
}

pub async fn decide(
    query: &UserQuery,
    report: &DispatchReport,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Decision {
    let messages = match assemble_evidence_prompt(query, report, template) {
        Ok(m) => m,
        Err(DecisionError::NoDetections) => return Decision::without_llm(NO_DETECTION_RATIONALE, None),
    };
    let reply = match gateway.complete_messages(messages).await {
        Ok(c) => c.text,
        Err(e) => {
            tracing::warn!(error = %e, "decision call failed, not clarifying");
            return Decision::without_llm(
                format!("decision call failed: {e}"),
                Some(DecisionFallback::GatewayFailure),
            );
        }
    };
    match parse_decision_reply(&reply) {
        Some((label, reason)) => {
            let reason = if reason.is_empty() { label.to_string() } else { reason };
            Decision::from_llm(label, reason)
        }
        None => Decision::unparseable(format!("unparseable decision reply: {}", reply.trim())),
    }
}
