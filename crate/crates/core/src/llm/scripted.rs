use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use regex::Regex;
use serde::Deserialize;

use super::{BackendKind, Completion, CompletionBackend, CompletionRequest, LlmError, Usage};

#[derive(Debug, Clone)]
pub enum Matcher {
    Contains(String),
    AllOf(Vec<String>),
    Pattern(Regex),
}

impl Matcher {
    pub fn contains(needle: impl Into<String>) -> Self {
        Self::Contains(needle.into())
    }

    pub fn all_of<I, S>(needles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::AllOf(needles.into_iter().map(Into::into).collect())
    }

    pub fn pattern(re: &str) -> Result<Self, LlmError> {
        Regex::new(re)
            .map(Self::Pattern)
            .map_err(|e| LlmError::Config(format!("bad rule pattern {re:?}: {e}")))
    }

    pub fn is_match(&self, prompt: &str) -> bool {
        match self {
            Self::Contains(needle) => prompt.contains(needle.as_str()),
            Self::AllOf(needles) => needles.iter().all(|n| prompt.contains(n.as_str())),
            Self::Pattern(re) => re.is_match(prompt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    Reply(String),
    Fail(String),
}

#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub matcher: Matcher,
    pub action: ScriptAction,
    pub priority: i32,
    pub delay: Option<Duration>,
}

impl ScriptRule {
    pub fn new(matcher: Matcher, action: ScriptAction, priority: i32) -> Self {
        Self {
            matcher,
            action,
            priority,
            delay: None,
        }
    }

    pub fn reply(matcher: Matcher, response: impl Into<String>, priority: i32) -> Self {
        Self::new(matcher, ScriptAction::Reply(response.into()), priority)
    }

    pub fn with_delay_ms(mut self, ms: u64) -> Self {
        self.delay = Some(Duration::from_millis(ms));
        self
    }
}

/// Deterministic backend: the highest-priority matching rule answers, and
/// rules of equal priority are tried in registration order.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
}

#[derive(Debug, Default)]
pub struct ScriptedBackendBuilder {
    rules: Vec<ScriptRule>,
}

impl ScriptedBackendBuilder {
    pub fn rule(mut self, rule: ScriptRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn rules(mut self, rules: impl IntoIterator<Item = ScriptRule>) -> Self {
        self.rules.extend(rules);
        self
    }

    pub fn build(mut self) -> ScriptedBackend {
        // stable sort keeps registration order within a priority
        self.rules.sort_by_key(|r| std::cmp::Reverse(r.priority));
        ScriptedBackend { rules: self.rules }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rules: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    #[serde(default)]
    contains: Option<String>,
    #[serde(default)]
    all_of: Option<Vec<String>>,
    #[serde(default)]
    pattern: Option<String>,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    priority: i32,
    #[serde(default)]
    delay_ms: Option<u64>,
}

impl RuleEntry {
    fn into_rule(self, index: usize) -> Result<ScriptRule, LlmError> {
        let matcher = match (self.contains, self.all_of, self.pattern) {
            (Some(s), None, None) => Matcher::Contains(s),
            (None, Some(v), None) => Matcher::AllOf(v),
            (None, None, Some(p)) => Matcher::pattern(&p)?,
            _ => {
                return Err(LlmError::Config(format!(
                    "rule {index}: exactly one of contains, all_of, pattern is required"
                )))
            }
        };
        let action = match (self.response, self.error) {
            (Some(r), None) => ScriptAction::Reply(r),
            (None, Some(e)) => ScriptAction::Fail(e),
            _ => {
                return Err(LlmError::Config(format!(
                    "rule {index}: exactly one of response, error is required"
                )))
            }
        };
        let mut rule = ScriptRule::new(matcher, action, self.priority);
        if let Some(ms) = self.delay_ms {
            rule = rule.with_delay_ms(ms);
        }
        Ok(rule)
    }
}

impl ScriptedBackend {
    pub fn builder() -> ScriptedBackendBuilder {
        ScriptedBackendBuilder::default()
    }

    /// Parses a JSON script: `{"rules": [{"contains": "...", "response": "...", "priority": 0}]}`.
    ///
    /// A rule uses one of `contains`, `all_of` or `pattern` (regex) as its
    /// matcher and one of `response` or `error` as its action. `delay_ms`
    /// postpones the answer.
    pub fn from_json(json: &str) -> Result<Self, LlmError> {
        let file: RuleFile = serde_json::from_str(json)
            .map_err(|e| LlmError::Config(format!("script file: {e}")))?;
        let rules = file
            .rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.into_rule(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::builder().rules(rules).build())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("script file {}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn find(&self, prompt: &str) -> Option<&ScriptRule> {
        self.rules.iter().find(|r| r.matcher.is_match(prompt))
    }
}

#[async_trait]
impl CompletionBackend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let prompt = request.prompt_text();
        let Some(rule) = self.find(&prompt) else {
            let excerpt: String = prompt.chars().take(80).collect();
            return Err(LlmError::NoScriptMatch(excerpt));
        };
        if let Some(delay) = rule.delay {
            tokio::time::sleep(delay).await;
        }
        match &rule.action {
            ScriptAction::Reply(text) => Ok(Completion {
                text: text.clone(),
                usage: Usage {
                    prompt_tokens: prompt.split_whitespace().count() as u64,
                    completion_tokens: text.split_whitespace().count() as u64,
                },
            }),
            ScriptAction::Fail(msg) => Err(LlmError::Scripted(msg.clone())),
        }
    }
}
