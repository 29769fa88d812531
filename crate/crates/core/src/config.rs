//! TOML configuration and construction of the runtime pieces it describes.
//!
//! Relative paths in the file resolve against the file's own directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::AgentError;
use crate::clarifier::{default_question_template, load_question_template};
use crate::decision::{default_decision_template, load_decision_template};
use crate::detectors::knowledge::KnowledgeError;
use crate::detectors::{builtin_registry, BuiltinSettings, KnowledgeStores, ProductThresholds};
use crate::engine::Engine;
use crate::eval::{load_few_shot, EvalError, FewShotExample, RunOptions};
use crate::llm::{
    record_replay, CompletionBackend, Gateway, HttpBackend, HttpSettings, LlmError, ReplayMode,
    RequestDefaults, ScriptedBackend,
};
use crate::model::DEFAULT_CHOICE_CAP;
use crate::service::{ClarifyService, EvalResources, SessionStore};
use crate::template::TemplateError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Agents(#[from] AgentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Http,
    Scripted,
    Replay,
}

impl std::str::FromStr for BackendChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(Self::Http),
            "scripted" => Ok(Self::Scripted),
            "replay" => Ok(Self::Replay),
            other => Err(ConfigError::Invalid(format!(
                "unknown backend `{other}` (expected http, scripted or replay)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub backend: BackendChoice,
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub script: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub transcript_mode: Option<ReplayMode>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        let defaults = RequestDefaults::default();
        Self {
            backend: BackendChoice::Scripted,
            base_url: "https://api.openai.com/v1".into(),
            model: defaults.model,
            api_key_env: Some("OPENAI_API_KEY".into()),
            temperature: defaults.temperature,
            max_tokens: defaults.max_tokens,
            timeout_ms: defaults.timeout_ms,
            script: None,
            transcript: None,
            transcript_mode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    pub timeout_ms: u64,
    pub product_threshold: usize,
    pub product_margin: usize,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        let builtin = BuiltinSettings::default();
        Self {
            timeout_ms: builtin.timeout_ms,
            product_threshold: builtin.product.threshold,
            product_margin: builtin.product.margin,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeConfig {
    pub entities: PathBuf,
    pub products: PathBuf,
    pub concepts: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptsConfig {
    pub decision: Option<PathBuf>,
    pub question: Option<PathBuf>,
    pub few_shot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_choice_cap")]
    pub choice_cap: usize,
    #[serde(default = "default_parallelism")]
    pub eval_parallelism: usize,
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub agents: AgentsConfig,
    pub knowledge: KnowledgeConfig,
    #[serde(default)]
    pub prompts: PromptsConfig,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_choice_cap() -> usize {
    DEFAULT_CHOICE_CAP
}

fn default_parallelism() -> usize {
    8
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: Config =
            toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.knowledge.entities);
        fix(&mut self.knowledge.products);
        fix(&mut self.knowledge.concepts);
        for p in [
            &mut self.llm.script,
            &mut self.llm.transcript,
            &mut self.prompts.decision,
            &mut self.prompts.question,
            &mut self.prompts.few_shot,
            &mut self.snapshot,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.choice_cap == 0 {
            return Err(ConfigError::Invalid("choice_cap must be at least 1".into()));
        }
        if self.agents.timeout_ms == 0 || self.llm.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeouts must be positive".into()));
        }
        if self.agents.product_threshold == 0 {
            return Err(ConfigError::Invalid("product_threshold must be at least 1".into()));
        }
        Ok(())
    }

    pub fn request_defaults(&self) -> RequestDefaults {
        RequestDefaults {
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
            max_tokens: self.llm.max_tokens,
            timeout_ms: self.llm.timeout_ms,
        }
    }

    pub fn build_backend(&self) -> Result<Arc<dyn CompletionBackend>, ConfigError> {
        let llm = &self.llm;
        let backend: Arc<dyn CompletionBackend> = match llm.backend {
            BackendChoice::Scripted => {
                let path = llm.script.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("scripted backend needs llm.script".into())
                })?;
                if llm.transcript_mode == Some(ReplayMode::Record) {
                    return Err(LlmError::Config(
                        "record mode wraps the http backend, not scripted".into(),
                    )
                    .into());
                }
                Arc::new(ScriptedBackend::from_path(path)?)
            }
            BackendChoice::Replay => {
                let path = llm.transcript.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("replay backend needs llm.transcript".into())
                })?;
                record_replay(ReplayMode::Replay, path, None)?
            }
            BackendChoice::Http => {
                let http: Arc<dyn CompletionBackend> = Arc::new(HttpBackend::new(&HttpSettings {
                    base_url: llm.base_url.clone(),
                    api_key_env: llm.api_key_env.clone(),
                })?);
                match (llm.transcript_mode, &llm.transcript) {
                    (Some(ReplayMode::Record), Some(path)) => {
                        record_replay(ReplayMode::Record, path, Some(http))?
                    }
                    (Some(ReplayMode::Record), None) => {
                        return Err(ConfigError::Invalid("record mode needs llm.transcript".into()))
                    }
                    _ => http,
                }
            }
        };
        Ok(backend)
    }

    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        Ok(Gateway::new(self.build_backend()?, self.request_defaults()))
    }

    pub fn load_stores(&self) -> Result<KnowledgeStores, ConfigError> {
        Ok(KnowledgeStores::load(
            &self.knowledge.entities,
            &self.knowledge.products,
            &self.knowledge.concepts,
        )?)
    }

    pub fn builtin_settings(&self) -> BuiltinSettings {
        BuiltinSettings {
            timeout_ms: self.agents.timeout_ms,
            product: ProductThresholds {
                threshold: self.agents.product_threshold,
                margin: self.agents.product_margin,
            },
        }
    }

    /// Engine with the built-in agents; the generic detector gets its own
    /// gateway handle so decision-stage calls are counted separately.
    pub fn build_engine(&self, gateway: &Gateway) -> Result<Engine, ConfigError> {
        let stores = self.load_stores()?;
        let registry = builtin_registry(&stores, gateway.scoped(), self.builtin_settings())?;
        let decision = match &self.prompts.decision {
            Some(p) => load_decision_template(p)?,
            None => default_decision_template(),
        };
        let question = match &self.prompts.question {
            Some(p) => load_question_template(p)?,
            None => default_question_template(),
        };
        Ok(Engine::new(registry, gateway)
            .with_templates(decision, question)
            .with_choice_cap(self.choice_cap))
    }

    /// Service with the built-in engine, eval resources, and the session
    /// snapshot (if configured and present) loaded back in.
    pub fn build_service(&self) -> Result<ClarifyService, ConfigError> {
        let gateway = self.build_gateway()?;
        let engine = self.build_engine(&gateway)?;
        let eval = EvalResources {
            gateway: gateway.scoped(),
            few_shot: self.load_few_shot()?,
            options: RunOptions {
                parallelism: self.eval_parallelism.max(1),
                with_questions: false,
            },
        };
        let mut service = ClarifyService::new(engine).with_eval(eval);
        if let Some(path) = &self.snapshot {
            if path.exists() {
                let store = SessionStore::load(path).map_err(|e| ConfigError::Read {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                service = service.with_store(store);
            }
            service = service.with_snapshot_path(path.clone());
        }
        Ok(service)
    }

    pub fn load_few_shot(&self) -> Result<Option<Vec<FewShotExample>>, ConfigError> {
        match &self.prompts.few_shot {
            Some(p) => Ok(Some(load_few_shot(p)?)),
            None => Ok(None),
        }
    }
}
