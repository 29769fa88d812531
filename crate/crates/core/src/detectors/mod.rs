//! Built-in agents: sentence-level, product, and entity-linking ambiguity
//! detectors plus the concept-graph grounding agent.

use std::sync::Arc;

mod concepts;
mod entity;
mod generic;
pub mod knowledge;
mod matching;
mod product;

pub use concepts::{ground_concepts, ConceptGraphAgent};
pub use entity::{detect_entity_ambiguity, link_entities, EntityLinkingAgent, SpanMatch};
pub use generic::{
    detect_generic, generic_prompt, parse_generic_reply, GenericAgent, GenericReading,
    GENERIC_SYSTEM_PROMPT,
};
pub use knowledge::{ConceptLexicon, Entity, EntityKb, KnowledgeStores, ProductCatalog};
pub use matching::AliasIndex;
pub use product::{detect_product, ProductAgent, ProductThresholds};

use crate::agents::{AgentDescriptor, AgentError, AgentRegistry};
use crate::llm::Gateway;

pub const GENERIC_AGENT_ID: &str = "generic-ambiguity";
pub const PRODUCT_AGENT_ID: &str = "product-ambiguity";
pub const ENTITY_AGENT_ID: &str = "entity-linking";
pub const CONCEPT_AGENT_ID: &str = "concept-graph";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinSettings {
    pub timeout_ms: u64,
    pub product: ProductThresholds,
}

impl Default for BuiltinSettings {
    fn default() -> Self {
        Self {
            timeout_ms: crate::agents::DEFAULT_AGENT_TIMEOUT_MS,
            product: ProductThresholds::default(),
        }
    }
}

/// Registry with the four built-in agents in their canonical order:
/// generic, product, entity, concept graph.
pub fn builtin_registry(
    stores: &KnowledgeStores,
    gateway: Gateway,
    settings: BuiltinSettings,
) -> Result<AgentRegistry, AgentError> {
    let mut registry = AgentRegistry::new();
    let t = settings.timeout_ms;
    registry.register(
        AgentDescriptor::detector(GENERIC_AGENT_ID).with_timeout_ms(t),
        Arc::new(GenericAgent::new(GENERIC_AGENT_ID, gateway)),
    )?;
    registry.register(
        AgentDescriptor::detector(PRODUCT_AGENT_ID).with_timeout_ms(t),
        Arc::new(ProductAgent::new(
            PRODUCT_AGENT_ID,
            Arc::clone(&stores.products),
            settings.product,
        )),
    )?;
    registry.register(
        AgentDescriptor::detector(ENTITY_AGENT_ID).with_timeout_ms(t),
        Arc::new(EntityLinkingAgent::new(ENTITY_AGENT_ID, Arc::clone(&stores.entities))),
    )?;
    registry.register(
        AgentDescriptor::grounding(CONCEPT_AGENT_ID).with_timeout_ms(t),
        Arc::new(ConceptGraphAgent::new(CONCEPT_AGENT_ID, Arc::clone(&stores.concepts))),
    )?;
    Ok(registry)
}
