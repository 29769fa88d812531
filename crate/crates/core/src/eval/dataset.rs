use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{AmbiguityCategory, ClarificationLabel};

/// One labeled query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub id: String,
    pub query: String,
    #[serde(rename = "label")]
    pub gold_label: ClarificationLabel,
    #[serde(default)]
    pub categories: Vec<AmbiguityCategory>,
}

/// Parses a JSON Lines dataset. Blank lines are skipped; the first bad line
/// aborts the load.
pub fn parse_dataset(text: &str) -> Result<Vec<EvalRecord>, EvalError> {
    let mut ids = HashSet::new();
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(raw).map_err(|e| EvalError::Line {
            line,
            message: e.to_string(),
        })?;
        if record.gold_label == ClarificationLabel::NotNeeded && !record.categories.is_empty() {
            return Err(EvalError::Line {
                line,
                message: format!("record `{}` is not_needed but lists categories", record.id),
            });
        }
        if !ids.insert(record.id.clone()) {
            return Err(EvalError::DuplicateId { id: record.id, line });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}
