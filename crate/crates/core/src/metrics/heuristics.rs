use serde::{Deserialize, Serialize};

use crate::concepts::{top_representations, ConceptModel, RepresentationQuery};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{is_isomorphic, Subgraph, ISOMORPHISM_NODE_LIMIT};

pub const HEURISTIC_NAMES: [&str; 8] = [
    "house with top node",
    "house with middle node",
    "house with bottom node",
    "house with top node and attachment edge",
    "house with middle node, attachment on far side",
    "house with middle node, attachment on close side",
    "house with bottom node, attachment on far side",
    "house with bottom node, attachment on close side",
];

/// Representations per concept that must all match a template.
const MATCH_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heuristic {
    pub name: String,
    pub template: Subgraph,
    /// Concepts whose top representations all match.
    pub matched_concepts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicReport {
    pub recovered: usize,
    pub heuristics: Vec<Heuristic>,
}

/// The eight anchored house templates. House ids: 0 and 1 are the middle nodes,
/// 2 and 3 the bottom nodes (3 below 0), 4 the top. With an attachment edge, 0
/// connects to base node 5, so 0 and 3 are on the close side, 1 and 2 on the far side.
pub fn heuristic_templates() -> Vec<Subgraph> {
    let house = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)];
    let plain = |anchor: usize| Subgraph::from_edges(5, house, [anchor]).expect("valid house");
    let armed = |anchor: usize| {
        Subgraph::from_edges(6, house.into_iter().chain([(0, 5)]), [anchor]).expect("valid house")
    };
    vec![plain(4), plain(0), plain(3), armed(4), armed(1), armed(0), armed(2), armed(3)]
}

/// Counts templates matched by some concept whose `MATCH_COUNT` nearest-centroid
/// representations at radius `hops` are all anchor-preserving isomorphic to it.
pub fn heuristic_recovery_count(model: &ConceptModel, dataset: &Dataset, hops: usize) -> Result<HeuristicReport> {
    if dataset.name != "ba_shapes" && dataset.name != "ba_community" {
        return Err(Error::input(format!(
            "heuristics apply to ba_shapes and ba_community only, not {:?}",
            dataset.name
        )));
    }
    let templates = heuristic_templates();
    let mut heuristics: Vec<Heuristic> = templates
        .iter()
        .zip(HEURISTIC_NAMES)
        .map(|(t, name)| Heuristic { name: name.to_string(), template: t.clone(), matched_concepts: Vec::new() })
        .collect();
    for c in 0..model.num_concepts() {
        if model.members(c)?.len() < MATCH_COUNT {
            continue;
        }
        let reps = top_representations(model, dataset, &RepresentationQuery::nearest_centroid(c, hops, MATCH_COUNT))?;
        if reps.iter().any(|r| r.subgraph.num_nodes() > ISOMORPHISM_NODE_LIMIT) {
            continue;
        }
        for h in heuristics.iter_mut() {
            let mut all = true;
            for r in &reps {
                if !is_isomorphic(&r.subgraph, &h.template, true, false)? {
                    all = false;
                    break;
                }
            }
            if all {
                h.matched_concepts.push(c);
            }
        }
    }
    let recovered = heuristics.iter().filter(|h| !h.matched_concepts.is_empty()).count();
    Ok(HeuristicReport { recovered, heuristics })
}
