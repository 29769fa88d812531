use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::llm::ChatMessage;
use crate::model::ClarificationLabel;

pub const FEW_SHOT_COUNT: usize = 10;

const DEFAULT_BASELINE_SYSTEM: &str = include_str!("../../templates/baseline.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub query: String,
    pub label: ClarificationLabel,
    #[serde(default)]
    pub clarification: Option<String>,
}

impl FewShotExample {
    fn answer(&self) -> String {
        match (&self.label, &self.clarification) {
            (ClarificationLabel::Needed, Some(c)) => format!("NEEDED: {c}"),
            _ => "NOT_NEEDED".to_owned(),
        }
    }
}

pub fn parse_few_shot(json: &str) -> Result<Vec<FewShotExample>, EvalError> {
    let examples: Vec<FewShotExample> =
        serde_json::from_str(json).map_err(|e| EvalError::FewShot(e.to_string()))?;
    for (i, ex) in examples.iter().enumerate() {
        let has_clarification = ex.clarification.as_deref().is_some_and(|c| !c.trim().is_empty());
        if ex.label == ClarificationLabel::Needed && !has_clarification {
            return Err(EvalError::FewShot(format!(
                "example {} is labeled needed but has no clarification",
                i + 1
            )));
        }
    }
    Ok(examples)
}

pub fn load_few_shot(path: impl AsRef<Path>) -> Result<Vec<FewShotExample>, EvalError> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| EvalError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_few_shot(&json)
}

/// Header that opens each worked example in the baseline prompt.
pub fn example_header(n: usize) -> String {
    format!("[example {n}]")
}

pub const TARGET_MARKER: &str = "Target query:";

/// Few-shot prompt: fixed instructions, exactly ten worked examples in the
/// given order, then the query to classify.
pub fn build_baseline_prompt(
    query: &str,
    examples: &[FewShotExample],
) -> Result<Vec<ChatMessage>, EvalError> {
    if examples.len() != FEW_SHOT_COUNT {
        return Err(EvalError::FewShotCount {
            expected: FEW_SHOT_COUNT,
            got: examples.len(),
        });
    }
    let mut body = String::new();
    for (i, ex) in examples.iter().enumerate() {
        body.push_str(&format!(
            "{}\nQuery: {}\nAnswer: {}\n\n",
            example_header(i + 1),
            ex.query,
            ex.answer()
        ));
    }
    body.push_str(&format!("{TARGET_MARKER} {query}\nAnswer:"));
    Ok(vec![
        ChatMessage::system(DEFAULT_BASELINE_SYSTEM.trim_end()),
        ChatMessage::user(body),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples(n: usize) -> Vec<FewShotExample> {
        (0..n)
            .map(|i| FewShotExample {
                query: format!("query {i}"),
                label: if i % 2 == 0 {
                    ClarificationLabel::Needed
                } else {
                    ClarificationLabel::NotNeeded
                },
                clarification: (i % 2 == 0).then(|| format!("which {i}?")),
            })
            .collect()
    }

    #[test]
    fn ten_examples_ten_blocks() {
        let prompt = build_baseline_prompt("what is a schema", &examples(10)).unwrap();
        let body = &prompt[1].content;
        assert_eq!(body.matches("[example ").count(), 10);
        assert!(body.contains("Query: query 0\nAnswer: NEEDED: which 0?"));
        assert!(body.contains("Query: query 1\nAnswer: NOT_NEEDED"));
        assert!(body.ends_with("Target query: what is a schema\nAnswer:"));
        assert!(prompt[0].content.contains("NOT_NEEDED"));
    }

    #[test]
    fn wrong_count_rejected() {
        assert!(matches!(
            build_baseline_prompt("q", &examples(9)),
            Err(EvalError::FewShotCount { expected: 10, got: 9 })
        ));
        assert!(build_baseline_prompt("q", &examples(11)).is_err());
    }

    #[test]
    fn order_is_preserved() {
        let mut ex = examples(10);
        ex.reverse();
        let body = build_baseline_prompt("q", &ex).unwrap()[1].content.clone();
        let first = body.find("query 9").unwrap();
        let last = body.find("query 0").unwrap();
        assert!(first < last);
    }

    #[test]
    fn needed_examples_need_a_clarification() {
        assert!(parse_few_shot(r#"[{"query":"q","label":"needed"}]"#).is_err());
        assert!(parse_few_shot(r#"[{"query":"q","label":"not_needed"}]"#).is_ok());
    }
}
