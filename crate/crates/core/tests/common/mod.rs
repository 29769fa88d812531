#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use clarify_core::Config;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_config() -> Config {
    Config::load(fixtures().join("config.toml")).expect("fixture config loads")
}

pub mod strategies {
    use proptest::prelude::*;

    const VOCAB: &[&str] = &["alpha", "beta", "gamma", "delta", "omega"];

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(VOCAB).prop_map(str::to_owned)
    }

    fn alias() -> impl Strategy<Value = String> {
        prop::collection::vec(word(), 1..=3).prop_map(|w| w.join(" "))
    }

    /// Entity records (id, aliases) with at most 20 aliases in total.
    pub fn entity_records() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
        prop::collection::vec(prop::collection::vec(alias(), 1..=4), 1..=6).prop_map(|groups| {
            let mut budget = 20usize;
            let mut out = Vec::new();
            for (i, mut aliases) in groups.into_iter().enumerate() {
                if budget == 0 {
                    break;
                }
                aliases.truncate(budget);
                budget -= aliases.len();
                out.push((format!("E{i}"), aliases));
            }
            out
        })
    }

    pub fn query_tokens() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(word(), 1..=12)
    }
}

pub mod stubs {
    use std::sync::Arc;
    use std::time::Duration;

    use clarify_core::agents::{agent_fn, Agent, AgentError};
    use clarify_core::model::{
        AgentVerdict, AmbiguityCategory, Candidate, Evidence, EvidenceKind, UserQuery,
    };

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Behavior {
        Detect,
        Pass,
        Fail,
        Panic,
        Hang,
    }

    /// Agent that sleeps `delay_ms`, then acts out `behavior`.
    pub fn stub_agent(id: &str, behavior: Behavior, delay_ms: u64) -> Arc<dyn Agent> {
        let id = id.to_owned();
        Arc::new(agent_fn(move |query: UserQuery| {
            let id = id.clone();
            async move {
                tokio::time::sleep(Duration::from_millis(delay_ms)).await;
                match behavior {
                    Behavior::Detect => {
                        let evidence = Evidence::builder(id.clone(), EvidenceKind::Generic)
                            .category(AmbiguityCategory::Contextual)
                            .span(0, 1, query.surface(0, 1))
                            .candidate(Candidate::new(format!("{id}-choice"), format!("{id} reading")))
                            .rationale(format!("{id} saw something"))
                            .build(query.tokens().len())
                            .unwrap();
                        Ok(AgentVerdict::detected(id, evidence).unwrap())
                    }
                    Behavior::Pass => Ok(AgentVerdict::not_detected(id, None)),
                    Behavior::Fail => Err(AgentError::Analysis(format!("{id} exploded"))),
                    Behavior::Panic => panic!("{id} panicked"),
                    Behavior::Hang => {
                        tokio::time::sleep(Duration::from_secs(3_600)).await;
                        Ok(AgentVerdict::not_detected(id, None))
                    }
                }
            }
        }))
    }
}

pub mod engines {
    use clarify_core::agents::{AgentDescriptor, AgentRegistry};
    use clarify_core::detectors::builtin_registry;
    use clarify_core::llm::Gateway;
    use clarify_core::{ClarifyService, Engine};

    use super::fixture_config;
    use super::stubs::{stub_agent, Behavior};

    pub const FAILING_AGENT: &str = "flaky-detector";
    pub const SLOW_AGENT: &str = "slow-detector";

    /// Built-in fixture agents, optionally followed by one agent that errors
    /// and one that blows through a 50 ms budget.
    pub fn fixture_registry(gateway: &Gateway, with_faults: bool) -> AgentRegistry {
        let config = fixture_config();
        let stores = config.load_stores().unwrap();
        let mut registry =
            builtin_registry(&stores, gateway.scoped(), config.builtin_settings()).unwrap();
        if with_faults {
            registry
                .register(AgentDescriptor::detector(FAILING_AGENT), stub_agent(FAILING_AGENT, Behavior::Fail, 0))
                .unwrap();
            registry
                .register(
                    AgentDescriptor::detector(SLOW_AGENT).with_timeout_ms(50),
                    stub_agent(SLOW_AGENT, Behavior::Hang, 0),
                )
                .unwrap();
        }
        registry
    }

    pub fn fixture_service(with_faults: bool) -> ClarifyService {
        let gateway = fixture_config().build_gateway().unwrap();
        ClarifyService::new(Engine::new(fixture_registry(&gateway, with_faults), &gateway))
    }
}

/// Ids named by `[<tag>: id]` header lines, in order of appearance.
pub fn scan_headers(text: &str, tag: &str) -> Vec<String> {
    let open = format!("[{tag}: ");
    text.lines()
        .filter_map(|l| l.strip_prefix(open.as_str()))
        .filter_map(|rest| rest.strip_suffix(']'))
        .map(str::to_owned)
        .collect()
}
