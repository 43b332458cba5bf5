use serde::{Deserialize, Serialize};

use crate::concepts::{top_representations, ConceptModel, RepresentationQuery};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ged::{graph_edit_distance, EditCostConfig, ExceededBy, GedResult, DEFAULT_NODE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityOptions {
    pub hops: usize,
    pub top_m: usize,
    pub node_limit: usize,
    pub costs: EditCostConfig,
}

impl PurityOptions {
    pub fn new(hops: usize) -> Self {
        PurityOptions { hops, top_m: 3, node_limit: DEFAULT_NODE_LIMIT, costs: EditCostConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    TooFewMembers { members: usize },
    TooLarge { nodes: usize, limit: usize },
    SearchBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConceptPurity {
    Scored { score: f64 },
    Skipped(SkipReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub concepts: Vec<ConceptPurity>,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub scored: usize,
}

/// Mean pairwise GED among each concept's `top_m` nearest-centroid representations.
pub fn concept_purity(model: &ConceptModel, dataset: &Dataset, options: &PurityOptions) -> Result<PurityReport> {
    if options.top_m < 2 {
        return Err(Error::input("purity needs top_m >= 2"));
    }
    let mut concepts = Vec::with_capacity(model.num_concepts());
    for c in 0..model.num_concepts() {
        concepts.push(score_concept(model, dataset, c, options)?);
    }
    let scores: Vec<f64> = concepts
        .iter()
        .filter_map(|p| match p {
            ConceptPurity::Scored { score } => Some(*score),
            ConceptPurity::Skipped(_) => None,
        })
        .collect();
    if scores.is_empty() {
        return Err(Error::EmptyReport);
    }
    Ok(PurityReport {
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        avg: scores.iter().sum::<f64>() / scores.len() as f64,
        scored: scores.len(),
        concepts,
    })
}

fn score_concept(model: &ConceptModel, dataset: &Dataset, concept: usize, o: &PurityOptions) -> Result<ConceptPurity> {
    let members = model.members(concept)?.len();
    if members < 2 {
        return Ok(ConceptPurity::Skipped(SkipReason::TooFewMembers { members }));
    }
    let query = RepresentationQuery::nearest_centroid(concept, o.hops, o.top_m);
    let reps = top_representations(model, dataset, &query)?;
    if let Some(big) = reps.iter().map(|r| r.subgraph.num_nodes()).find(|&n| n > o.node_limit) {
        return Ok(ConceptPurity::Skipped(SkipReason::TooLarge { nodes: big, limit: o.node_limit }));
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            match graph_edit_distance(&reps[i].subgraph, &reps[j].subgraph, &o.costs, o.node_limit)? {
                GedResult::Distance { distance, .. } => total += distance,
                GedResult::Exceeded { by: ExceededBy::SearchBudget, .. } => {
                    return Ok(ConceptPurity::Skipped(SkipReason::SearchBudget));
                }
                GedResult::Exceeded { limit, .. } => {
                    return Ok(ConceptPurity::Skipped(SkipReason::TooLarge { nodes: limit + 1, limit }));
                }
            }
            pairs += 1;
        }
    }
    Ok(ConceptPurity::Scored { score: total / pairs as f64 })
}
