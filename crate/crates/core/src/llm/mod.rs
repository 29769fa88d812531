//! Completion interface over interchangeable backends.
//!
//! - `scripted`: deterministic rule-based replies for offline runs and tests
//! - `http`: chat-completions over HTTP with bearer auth
//! - `replay`: transcript recording around the HTTP backend and offline replay
//!
//! [`Gateway`] sits in front of a backend, applies request defaults, enforces
//! the per-request deadline, and counts calls.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

mod http;
mod replay;
mod scripted;

pub use http::{HttpBackend, HttpSettings};
pub use replay::{record_replay, request_digest, ReplayMode, TranscriptRecord};
pub use scripted::{Matcher, ScriptAction, ScriptRule, ScriptedBackend, ScriptedBackendBuilder};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("deadline of {timeout_ms} ms exceeded")]
    Deadline { timeout_ms: u64 },
    #[error("malformed provider response: {0}")]
    Decode(String),
    #[error("no script rule matches prompt starting with {0:?}")]
    NoScriptMatch(String),
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error("no transcript entry for request digest {0}")]
    ReplayMiss(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.is_empty()) {
            return Err(LlmError::InvalidRequest(format!("message {i} is empty")));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 || self.timeout_ms == 0 {
            return Err(LlmError::InvalidRequest(
                "max_tokens and timeout_ms must be positive".into(),
            ));
        }
        Ok(())
    }

    /// All message contents joined by newlines; what script rules match on.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
    Replay,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Http => "http",
            Self::Scripted => "scripted",
            Self::Replay => "replay",
        })
    }
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError>;
}

/// Defaults applied to requests built through [`Gateway::complete_messages`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestDefaults {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
}

impl Default for RequestDefaults {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_tokens: 256,
            timeout_ms: 20_000,
        }
    }
}

#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    defaults: Arc<RequestDefaults>,
    calls: Arc<AtomicU64>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.kind())
            .field("defaults", &self.defaults)
            .field("calls", &self.calls())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>, defaults: RequestDefaults) -> Self {
        Self {
            backend,
            defaults: Arc::new(defaults),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Same backend and defaults, independent call counter.
    pub fn scoped(&self) -> Self {
        Self {
            backend: Arc::clone(&self.backend),
            defaults: Arc::clone(&self.defaults),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn defaults(&self) -> &RequestDefaults {
        &self.defaults
    }

    /// Number of completion calls issued through this gateway handle.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest {
            messages,
            model: self.defaults.model.clone(),
            temperature: self.defaults.temperature,
            max_tokens: self.defaults.max_tokens,
            timeout_ms: self.defaults.timeout_ms,
        }
    }

    pub async fn complete_messages(
        &self,
        messages: Vec<ChatMessage>,
    ) -> Result<Completion, LlmError> {
        self.complete(&self.request(messages)).await
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let deadline = Duration::from_millis(request.timeout_ms);
        match tokio::time::timeout(deadline, self.backend.complete(request)).await {
            Ok(result) => result,
            Err(_) => Err(LlmError::Deadline {
                timeout_ms: request.timeout_ms,
            }),
        }
    }
}
