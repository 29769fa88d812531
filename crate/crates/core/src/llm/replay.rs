use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Mutex;

use super::{BackendKind, ChatMessage, Completion, CompletionBackend, CompletionRequest, LlmError, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    Record,
    Replay,
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub response: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

/// Hex SHA-256 over the JSON encoding of (model, temperature, messages).
pub fn request_digest(request: &CompletionRequest) -> String {
    let input = DigestInput {
        model: &request.model,
        temperature: request.temperature,
        messages: &request.messages,
    };
    let bytes = serde_json::to_vec(&input).expect("digest input serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Wraps a backend for transcript recording, or builds an offline replayer.
///
/// `Record` requires `inner` to be the HTTP backend and appends one JSON line
/// per successful call. `Replay` ignores `inner` and needs an existing
/// transcript.
pub fn record_replay(
    mode: ReplayMode,
    transcript_path: impl AsRef<Path>,
    inner: Option<Arc<dyn CompletionBackend>>,
) -> Result<Arc<dyn CompletionBackend>, LlmError> {
    let path = transcript_path.as_ref().to_path_buf();
    match mode {
        ReplayMode::Record => {
            let inner = inner
                .ok_or_else(|| LlmError::Config("record mode needs a backend to wrap".into()))?;
            if inner.kind() != BackendKind::Http {
                return Err(LlmError::Config(format!(
                    "record mode wraps the http backend, not {}",
                    inner.kind()
                )));
            }
            Ok(Arc::new(RecordingBackend {
                inner,
                path,
                lock: Mutex::new(()),
            }))
        }
        ReplayMode::Replay => Ok(Arc::new(ReplayBackend::load(&path)?)),
    }
}

struct RecordingBackend {
    inner: Arc<dyn CompletionBackend>,
    path: PathBuf,
    lock: Mutex<()>,
}

#[async_trait]
impl CompletionBackend for RecordingBackend {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let completion = self.inner.complete(request).await?;
        let record = TranscriptRecord {
            digest: request_digest(request),
            response: completion.text.clone(),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        let _guard = self.lock.lock().await;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(line.as_bytes())?;
        Ok(completion)
    }
}

#[derive(Debug)]
struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    fn load(path: &Path) -> Result<Self, LlmError> {
        let file = std::fs::File::open(path).map_err(|e| {
            LlmError::Config(format!("transcript {}: {e}", path.display()))
        })?;
        let mut responses = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(&line).map_err(|e| {
                LlmError::Config(format!("transcript {} line {}: {e}", path.display(), n + 1))
            })?;
            // later records win, so re-recording a prompt updates it
            responses.insert(record.digest, record.response);
        }
        Ok(Self { responses })
    }
}

#[async_trait]
impl CompletionBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let digest = request_digest(request);
        match self.responses.get(&digest) {
            Some(text) => Ok(Completion {
                text: text.clone(),
                usage: Usage::default(),
            }),
            None => Err(LlmError::ReplayMiss(digest)),
        }
    }
}
