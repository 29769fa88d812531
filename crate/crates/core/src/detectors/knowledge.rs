//! Domain knowledge consulted by the built-in agents, loaded once from JSON
//! files and shared read-only afterwards.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::matching::AliasIndex;
use crate::model::tokenize;

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("`{owner}` has an alias or keyword with no tokens: {value:?}")]
    EmptyKey { owner: String, value: String },
    #[error("product `{0}` has no keywords")]
    NoKeywords(String),
    #[error("product `{owner}` keyword {value:?} must be a single token")]
    MultiTokenKeyword { owner: String, value: String },
    #[error("entity `{0}` has no aliases")]
    NoAliases(String),
    #[error("concept `{term}` relates to unknown term `{related}`")]
    DanglingRelation { term: String, related: String },
    #[error("duplicate concept term `{0}`")]
    DuplicateTerm(String),
}

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub display_name: String,
    pub entity_type: String,
    pub description: String,
}

/// Entities file record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    #[serde(default)]
    pub description: String,
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EntityKb {
    aliases: AliasIndex<Vec<Arc<Entity>>>,
}

impl EntityKb {
    /// Each alias maps to its entities in record order.
    pub fn from_records(records: Vec<EntityRecord>) -> Result<Self, KnowledgeError> {
        let mut ids = HashSet::new();
        let mut aliases = AliasIndex::default();
        for rec in records {
            if !ids.insert(rec.id.clone()) {
                return Err(KnowledgeError::DuplicateId(rec.id));
            }
            if rec.aliases.is_empty() {
                return Err(KnowledgeError::NoAliases(rec.id));
            }
            let entity = Arc::new(Entity {
                id: rec.id,
                display_name: rec.name,
                entity_type: rec.entity_type,
                description: rec.description,
            });
            for alias in rec.aliases {
                let key = tokenize(&alias);
                if key.is_empty() {
                    return Err(KnowledgeError::EmptyKey {
                        owner: entity.id.clone(),
                        value: alias,
                    });
                }
                let list = aliases.get_or_insert_with(key, Vec::new);
                if !list.iter().any(|e: &Arc<Entity>| e.id == entity.id) {
                    list.push(Arc::clone(&entity));
                }
            }
        }
        Ok(Self { aliases })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        Self::from_records(read_json(path.as_ref())?)
    }

    pub fn entities_for(&self, alias_tokens: &[String]) -> Option<&[Arc<Entity>]> {
        self.aliases.get(alias_tokens).map(Vec::as_slice)
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    pub(crate) fn index(&self) -> &AliasIndex<Vec<Arc<Entity>>> {
        &self.aliases
    }
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub name: String,
    pub keywords: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductRecord {
    pub id: String,
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ProductCatalog {
    products: Vec<Product>,
}

impl ProductCatalog {
    pub fn from_records(records: Vec<ProductRecord>) -> Result<Self, KnowledgeError> {
        let mut ids = HashSet::new();
        let mut products = Vec::with_capacity(records.len());
        for rec in records {
            if !ids.insert(rec.id.clone()) {
                return Err(KnowledgeError::DuplicateId(rec.id));
            }
            let mut keywords = BTreeSet::new();
            for kw in rec.keywords {
                let mut toks = tokenize(&kw);
                match toks.len() {
                    0 => {
                        return Err(KnowledgeError::EmptyKey {
                            owner: rec.id,
                            value: kw,
                        })
                    }
                    1 => {
                        keywords.insert(toks.remove(0));
                    }
                    _ => {
                        return Err(KnowledgeError::MultiTokenKeyword {
                            owner: rec.id,
                            value: kw,
                        })
                    }
                }
            }
            if keywords.is_empty() {
                return Err(KnowledgeError::NoKeywords(rec.id));
            }
            products.push(Product {
                id: rec.id,
                name: rec.name,
                keywords,
            });
        }
        Ok(Self { products })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        Self::from_records(read_json(path.as_ref())?)
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }
}

// ---------------------------------------------------------------------------
// Concepts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    /// Normalized term, tokens joined by single spaces.
    pub term: String,
    pub definition: String,
    /// Normalized terms of directly related concepts.
    pub related: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub term: String,
    pub definition: String,
    #[serde(default)]
    pub related: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ConceptLexicon {
    terms: AliasIndex<ConceptNode>,
}

impl ConceptLexicon {
    /// Every `related` entry must name a term in the same lexicon.
    pub fn from_records(records: Vec<ConceptRecord>) -> Result<Self, KnowledgeError> {
        let mut terms = AliasIndex::default();
        let mut pending = Vec::with_capacity(records.len());
        for rec in records {
            let key = tokenize(&rec.term);
            if key.is_empty() {
                return Err(KnowledgeError::EmptyKey {
                    owner: "concepts".into(),
                    value: rec.term,
                });
            }
            let term = key.join(" ");
            if terms.get(&key).is_some() {
                return Err(KnowledgeError::DuplicateTerm(term));
            }
            let related: Vec<String> = rec.related.iter().map(|r| tokenize(r).join(" ")).collect();
            pending.push((term.clone(), related.clone()));
            terms.get_or_insert_with(key, || ConceptNode {
                term,
                definition: rec.definition,
                related,
            });
        }
        for (term, related) in pending {
            for r in related {
                let key: Vec<String> = r.split(' ').map(str::to_owned).collect();
                if r.is_empty() || terms.get(&key).is_none() {
                    return Err(KnowledgeError::DanglingRelation { term, related: r });
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        Self::from_records(read_json(path.as_ref())?)
    }

    pub fn node(&self, term_tokens: &[String]) -> Option<&ConceptNode> {
        self.terms.get(term_tokens)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn index(&self) -> &AliasIndex<ConceptNode> {
        &self.terms
    }
}

/// The three stores, bundled for agent construction.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStores {
    pub entities: Arc<EntityKb>,
    pub products: Arc<ProductCatalog>,
    pub concepts: Arc<ConceptLexicon>,
}

impl KnowledgeStores {
    pub fn load(
        entities: impl AsRef<Path>,
        products: impl AsRef<Path>,
        concepts: impl AsRef<Path>,
    ) -> Result<Self, KnowledgeError> {
        Ok(Self {
            entities: Arc::new(EntityKb::load(entities)?),
            products: Arc::new(ProductCatalog::load(products)?),
            concepts: Arc::new(ConceptLexicon::load(concepts)?),
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, KnowledgeError> {
    let text = std::fs::read_to_string(path).map_err(|source| KnowledgeError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| KnowledgeError::Parse {
        path: path.to_path_buf(),
        source,
    })
}
