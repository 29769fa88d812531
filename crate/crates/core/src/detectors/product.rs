use std::collections::HashSet;
use std::sync::Arc;

use async_trait::async_trait;

use super::knowledge::{Product, ProductCatalog};
use crate::agents::{Agent, AgentError};
use crate::model::{AgentVerdict, AmbiguityCategory, Candidate, Evidence, EvidenceKind, UserQuery};

/// Keyword-overlap thresholds for the product detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProductThresholds {
    /// Minimum overlap for a product to count.
    pub threshold: usize,
    /// Maximum gap between the two best scores for the query to stay ambiguous.
    pub margin: usize,
}

impl Default for ProductThresholds {
    fn default() -> Self {
        Self {
            threshold: 1,
            margin: 0,
        }
    }
}

/// Scores each product by keyword overlap with the query tokens and flags
/// the query when two or more products score within `margin` of each other.
pub fn detect_product(
    agent_id: &str,
    query: &UserQuery,
    catalog: &ProductCatalog,
    thresholds: ProductThresholds,
) -> Result<AgentVerdict, AgentError> {
    let ProductThresholds { threshold, margin } = thresholds;
    if threshold == 0 {
        return Err(AgentError::Analysis("product threshold must be >= 1".into()));
    }
    let tokens: HashSet<&str> = query.tokens().iter().map(String::as_str).collect();
    let mut scored: Vec<(usize, &Product)> = catalog
        .products()
        .iter()
        .map(|p| {
            let score = p.keywords.iter().filter(|k| tokens.contains(k.as_str())).count();
            (score, p)
        })
        .collect();
    scored.sort_by(|(sa, pa), (sb, pb)| sb.cmp(sa).then_with(|| pa.id.cmp(&pb.id)));

    let top1 = scored.first().map_or(0, |s| s.0);
    let top2 = scored.get(1).map_or(0, |s| s.0);
    let qualifying = scored.iter().filter(|(s, _)| *s >= threshold).count();
    let detected = qualifying >= 2 && top1 - top2 <= margin;

    let floor = threshold.max(top1.saturating_sub(margin));
    let candidates: Vec<(usize, &Product)> =
        scored.iter().copied().filter(|(s, _)| *s >= floor).collect();
    if candidates.is_empty() {
        return Ok(AgentVerdict::not_detected(agent_id, None));
    }

    let scores: Vec<String> = candidates
        .iter()
        .map(|(s, p)| format!("{} (score {s})", p.name))
        .collect();
    let rationale = if detected {
        format!("query matches several products equally well: {}", scores.join(", "))
    } else {
        format!("single dominant product: {}", scores.join(", "))
    };

    let mut builder = Evidence::builder(agent_id, EvidenceKind::Product)
        .category(AmbiguityCategory::Contextual)
        .rationale(rationale);
    let keywords: HashSet<&str> = candidates
        .iter()
        .flat_map(|(_, p)| p.keywords.iter().map(String::as_str))
        .collect();
    for (i, tok) in query.tokens().iter().enumerate() {
        if keywords.contains(tok.as_str()) {
            builder = builder.span(i, i + 1, tok.clone());
        }
    }
    for (_, p) in &candidates {
        builder = builder.candidate(Candidate::new(p.id.clone(), p.name.clone()));
    }
    let evidence = builder
        .build(query.tokens().len())
        .map_err(|e| AgentError::Analysis(e.to_string()))?;
    if detected {
        AgentVerdict::detected(agent_id, evidence).map_err(|e| AgentError::Analysis(e.to_string()))
    } else {
        Ok(AgentVerdict::not_detected(agent_id, Some(evidence)))
    }
}

pub struct ProductAgent {
    id: String,
    catalog: Arc<ProductCatalog>,
    thresholds: ProductThresholds,
}

impl ProductAgent {
    pub fn new(
        id: impl Into<String>,
        catalog: Arc<ProductCatalog>,
        thresholds: ProductThresholds,
    ) -> Self {
        Self {
            id: id.into(),
            catalog,
            thresholds,
        }
    }
}

#[async_trait]
impl Agent for ProductAgent {
    async fn analyze(&self, query: &UserQuery) -> Result<AgentVerdict, AgentError> {
        detect_product(&self.id, query, &self.catalog, self.thresholds)
    }
}
