use serde::{Deserialize, Serialize};

use crate::clustering::{squared_distance, NOISE};
use crate::concepts::{
    check_coverage, concept_contribution, top_representations, ConceptModel, Ordering, Representation,
    RepresentationQuery,
};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::graph::n_hop_neighborhood;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExplanation {
    pub node: usize,
    /// `None` when density clustering marked the node as noise.
    pub concept: Option<usize>,
    pub predicted_class: usize,
    pub actual_class: usize,
    /// Concept members nearest the concept centre.
    pub global: Vec<Representation>,
    /// The node itself, then the members nearest to it.
    pub local: Vec<Representation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptShare {
    pub concept: usize,
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExplanation {
    pub graph: usize,
    pub predicted_class: usize,
    pub actual_class: usize,
    /// Non-zero concept counts, largest first.
    pub contributions: Vec<ConceptShare>,
    pub noise: usize,
    /// For each of the leading concepts, its member in this graph nearest the centre.
    pub representations: Vec<Representation>,
}

fn check_predictions(dataset: &Dataset, predicted: &[usize]) -> Result<()> {
    if predicted.len() != dataset.num_units() {
        return Err(Error::input(format!(
            "{} predictions for {} units",
            predicted.len(),
            dataset.num_units()
        )));
    }
    Ok(())
}

/// Explains one node of a node-classification dataset through its concept.
pub fn explain_node(
    model: &ConceptModel,
    dataset: &Dataset,
    predicted: &[usize],
    node: usize,
    hops: usize,
    top_m: usize,
) -> Result<NodeExplanation> {
    if dataset.task() != Task::NodeClassification {
        return Err(Error::input("node explanations need a node-classification dataset"));
    }
    check_coverage(model, dataset)?;
    check_predictions(dataset, predicted)?;
    if node >= dataset.num_units() {
        return Err(Error::NotFound(format!("node {node}")));
    }
    let actual_class = dataset.unit_labels()[node];
    let assigned = model.assignments()[node];
    let (concept, global, local) = if assigned == NOISE {
        let own = Representation {
            node,
            graph: 0,
            distance: 0.0,
            subgraph: n_hop_neighborhood(dataset.graph(0)?, node, hops)?,
        };
        (None, Vec::new(), vec![own])
    } else {
        let global = top_representations(model, dataset, &RepresentationQuery::nearest_centroid(assigned, hops, top_m))?;
        let local = top_representations(
            model,
            dataset,
            &RepresentationQuery { concept: assigned, hops, top_m, ordering: Ordering::NearestToInstance { node } },
        )?;
        (Some(assigned), global, local)
    };
    Ok(NodeExplanation { node, concept, predicted_class: predicted[node], actual_class, global, local })
}

/// Explains one graph of a graph-classification dataset by its concept mix.
pub fn explain_graph(
    model: &ConceptModel,
    dataset: &Dataset,
    predicted: &[usize],
    graph: usize,
    hops: usize,
    top_concepts: usize,
) -> Result<GraphExplanation> {
    if dataset.task() != Task::GraphClassification {
        return Err(Error::input("graph explanations need a graph-classification dataset"));
    }
    check_predictions(dataset, predicted)?;
    if graph >= dataset.graphs().len() {
        return Err(Error::NotFound(format!("graph {graph}")));
    }
    let contribution = concept_contribution(model, dataset, graph)?;
    let total = contribution.total().max(1) as f64;
    let mut contributions: Vec<ConceptShare> = contribution
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &count)| count > 0)
        .map(|(concept, &count)| ConceptShare { concept, count, share: count as f64 / total })
        .collect();
    contributions.sort_by(|a, b| b.count.cmp(&a.count).then(a.concept.cmp(&b.concept)));
    let g = dataset.graph(graph)?;
    let offset = dataset.node_offsets()[graph];
    let mut representations = Vec::new();
    for share in contributions.iter().take(top_concepts) {
        let centre = model.centres.row(share.concept);
        let best = (0..g.num_nodes())
            .filter(|&local| model.assignments()[offset + local] == share.concept)
            .map(|local| (squared_distance(model.points.row(offset + local), centre).sqrt(), local))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((distance, local)) = best {
            representations.push(Representation {
                node: offset + local,
                graph,
                distance,
                subgraph: n_hop_neighborhood(g, local, hops)?,
            });
        }
    }
    Ok(GraphExplanation {
        graph,
        predicted_class: predicted[graph],
        actual_class: dataset.unit_labels()[graph],
        contributions,
        noise: contribution.noise,
        representations,
    })
}
