//! Multi-agent clarification pipeline for conversational assistants.
//!
//! A query is analyzed concurrently by pluggable agents. Detecting agents'
//! evidence is assembled into a prompt and an LLM decides whether a
//! clarification question is needed. If it is, choices are derived from the
//! agents' candidates, a question is generated, and the user's pick refines
//! the query before it is answered.
//!
//! - [`model`]: shared domain types and query validation
//! - [`llm`]: completion gateway over HTTP, scripted and replay backends
//! - [`agents`]: agent registry and concurrent dispatch
//! - [`detectors`]: the built-in agents and their knowledge stores
//! - [`decision`]: evidence prompt assembly and the clarification decision
//! - [`clarifier`]: choices, question generation, query refinement
//! - [`engine`]: one-turn composition of the above
//! - [`eval`]: datasets, few-shot baseline, P/R/F1 metrics
//! - [`service`]: sessions and the query/feedback loop
//! - [`config`]: TOML configuration

pub mod agents;
pub mod clarifier;
pub mod config;
pub mod decision;
pub mod detectors;
pub mod engine;
pub mod eval;
pub mod llm;
pub mod model;
pub mod service;
pub mod template;

pub use config::Config;
pub use engine::{Engine, TurnAnalysis};
pub use service::ClarifyService;
