//! Clarification choices, question generation, and feedback-driven query
//! refinement.

use std::collections::HashSet;

use crate::agents::DispatchReport;
use crate::decision::evidence_blocks;
use crate::llm::{ChatMessage, Gateway, LlmError};
use crate::model::{Choice, ClarificationQuestion, Feedback, ModelError, UserQuery};
use crate::template::{PromptTemplate, TemplateError};

pub const REPHRASE_CHOICE_ID: &str = "rephrase";
pub const REPHRASE_CHOICE_LABEL: &str = "Let me rephrase";
pub const FALLBACK_QUESTION: &str = "Which of the following do you mean?";

pub const QUESTION_SYSTEM_PROMPT: &str =
    "You write short clarification questions for an enterprise AI assistant.";
pub const ANSWER_SYSTEM_PROMPT: &str =
    "You are an enterprise AI assistant. Answer the user's question directly and concisely.";

pub const QUESTION_PLACEHOLDERS: &[&str] = &["query", "evidence_blocks", "choice_labels"];

const DEFAULT_QUESTION_TEMPLATE: &str = include_str!("../templates/question.txt");

#[derive(Debug, thiserror::Error)]
pub enum ClarifierError {
    #[error("clarification needs at least one detecting agent")]
    NoDetections,
    #[error("clarification needs at least one choice")]
    NoChoices,
    #[error("choice `{0}` is not offered by this question")]
    InvalidFeedback(String),
    #[error("answer generation failed: {0}")]
    Answer(#[from] LlmError),
    #[error("answer generation returned an empty reply")]
    EmptyAnswer,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn default_question_template() -> PromptTemplate {
    PromptTemplate::new("question.txt", DEFAULT_QUESTION_TEMPLATE, QUESTION_PLACEHOLDERS)
        .expect("bundled question template is valid")
}

pub fn load_question_template(path: &std::path::Path) -> Result<PromptTemplate, TemplateError> {
    PromptTemplate::load(path, QUESTION_PLACEHOLDERS)
}

/// Pools candidates of the detecting agents in registration order, drops
/// repeated ids, and keeps the first `choice_cap`. Detections without any
/// candidates yield a single free-text "rephrase" choice.
pub fn derive_choices(report: &DispatchReport, choice_cap: usize) -> Result<Vec<Choice>, ClarifierError> {
    if !report.any_detected() {
        return Err(ClarifierError::NoDetections);
    }
    let mut seen = HashSet::new();
    let choices: Vec<Choice> = report
        .detecting()
        .filter_map(|o| o.verdict.as_ref().and_then(|v| v.evidence()))
        .flat_map(|ev| ev.candidates())
        .filter(|c| seen.insert(c.id.clone()))
        .take(choice_cap)
        .map(|c| Choice {
            id: c.id.clone(),
            label: c.label.clone(),
            payload: Some(c.id.clone()),
        })
        .collect();
    if choices.is_empty() {
        return Ok(vec![Choice {
            id: REPHRASE_CHOICE_ID.into(),
            label: REPHRASE_CHOICE_LABEL.into(),
            payload: None,
        }]);
    }
    Ok(choices)
}

/// Cuts `text` after its first sentence terminator.
pub fn first_sentence(text: &str) -> &str {
    let line = text.trim().lines().next().unwrap_or("").trim();
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            let at_boundary = chars.peek().is_none_or(|(_, next)| next.is_whitespace());
            if at_boundary {
                return &line[..i + c.len_utf8()];
            }
        }
    }
    line
}

pub fn question_prompt(
    query: &UserQuery,
    report: &DispatchReport,
    choices: &[Choice],
    template: &PromptTemplate,
) -> Vec<ChatMessage> {
    let labels: Vec<String> = choices
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, c.label))
        .collect();
    let evidence = evidence_blocks(report);
    let body = template.render(&[
        ("query", query.text()),
        ("evidence_blocks", &evidence),
        ("choice_labels", &labels.join("\n")),
    ]);
    vec![ChatMessage::system(QUESTION_SYSTEM_PROMPT), ChatMessage::user(body)]
}

/// Asks the LLM for a one-sentence question; falls back to a fixed question
/// when the call fails or the reply is empty.
pub async fn generate_question(
    query: &UserQuery,
    report: &DispatchReport,
    choices: Vec<Choice>,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<ClarificationQuestion, ClarifierError> {
    if choices.is_empty() {
        return Err(ClarifierError::NoChoices);
    }
    let messages = question_prompt(query, report, &choices, template);
    let text = match gateway.complete_messages(messages).await {
        Ok(c) => {
            let sentence = first_sentence(&c.text);
            if sentence.is_empty() {
                FALLBACK_QUESTION.to_owned()
            } else {
                sentence.to_owned()
            }
        }
        Err(e) => {
            tracing::warn!(error = %e, "question generation failed, using fallback");
            FALLBACK_QUESTION.to_owned()
        }
    };
    let cap = choices.len();
    Ok(ClarificationQuestion::new(text, choices, cap)?)
}

/// Annotates the original query with the user's clarification.
pub fn refine_query(
    query: &UserQuery,
    feedback: &Feedback,
    question: &ClarificationQuestion,
) -> Result<String, ClarifierError> {
    match feedback {
        Feedback::SelectedChoice(id) => {
            let choice = question
                .choice(id)
                .ok_or_else(|| ClarifierError::InvalidFeedback(id.clone()))?;
            Ok(format!("{} (referring to: {})", query.text(), choice.label))
        }
        Feedback::FreeText(text) if text.trim().is_empty() => {
            Err(ClarifierError::InvalidFeedback("empty free text".into()))
        }
        Feedback::FreeText(text) => Ok(format!("{} (clarification: {})", query.text(), text.trim())),
    }
}

/// Answers the refined query; empty answers are errors.
pub async fn finalize(refined_query: &str, gateway: &Gateway) -> Result<String, ClarifierError> {
    let reply = gateway
        .complete_messages(vec![
            ChatMessage::system(ANSWER_SYSTEM_PROMPT),
            ChatMessage::user(refined_query),
        ])
        .await?;
    if reply.text.trim().is_empty() {
        return Err(ClarifierError::EmptyAnswer);
    }
    Ok(reply.text)
}
