//! Run-level operations behind both the CLI verbs and the HTTP endpoints.

use gcx_core::clustering::{Pca, NOISE};
use gcx_core::concepts::{discover_concepts, top_representations, Ordering, Representation, RepresentationQuery};
use gcx_core::explain::{explain_graph, explain_node, GraphExplanation, NodeExplanation};
use gcx_core::metrics::{model_silhouette, score_concepts};
use gcx_core::{Error, RunArtifact, ScoreReport, Task};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::request::{parse_reduction, ConceptRequest};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoverySummary {
    pub id: String,
    pub layer: usize,
    pub num_concepts: usize,
    pub sizes: Vec<usize>,
    pub noise: usize,
    pub silhouette: Option<f64>,
}

pub fn discover(run: &mut RunArtifact, request: &ConceptRequest) -> CliResult<DiscoverySummary> {
    let (layer, config) = request.resolve(run)?;
    let model = discover_concepts(&run.trace, layer, &config)?;
    let sizes = model.clustering.members().iter().map(Vec::len).collect();
    let summary = DiscoverySummary {
        id: String::new(),
        layer,
        num_concepts: model.num_concepts(),
        sizes,
        noise: model.clustering.noise_count(),
        silhouette: model_silhouette(&model),
    };
    let id = run.add_concepts(model)?;
    Ok(DiscoverySummary { id, ..summary })
}

/// Picks the named concept model, or the only one when no name is given.
pub fn pick_model<'a>(run: &'a RunArtifact, id: Option<&str>) -> CliResult<&'a str> {
    match id {
        Some(id) => Ok(run.concepts.get_key_value(id).ok_or_else(|| Error::NotFound(format!("concept model {id}")))?.0),
        None => match run.concepts.keys().collect::<Vec<_>>()[..] {
            [only] => Ok(only),
            [] => Err(Error::NotFound("no concept models in this run; run discover first".into()).into()),
            _ => Err(CliError::validation("model", "several concept models exist; name one")),
        },
    }
}

pub fn scores(run: &mut RunArtifact, id: &str, hops: usize, top_m: usize) -> CliResult<ScoreReport> {
    if top_m < 2 {
        return Err(CliError::validation("top", "purity needs at least 2 representations"));
    }
    if let Some(cached) = run.cached_score(id, hops, top_m) {
        return Ok(cached.clone());
    }
    let report = score_concepts(run.concept_model(id)?, &run.dataset, hops, top_m)?;
    run.store_score(id, report.clone())?;
    Ok(report)
}

pub fn parse_order(order: Option<&str>) -> CliResult<Ordering> {
    match order.unwrap_or("centroid") {
        "centroid" => Ok(Ordering::NearestCentroid),
        s => match s.strip_prefix("node:").map(str::parse::<usize>) {
            Some(Ok(node)) => Ok(Ordering::NearestToInstance { node }),
            _ => Err(CliError::validation("order", format!("expected centroid or node:<id>, got {s:?}"))),
        },
    }
}

pub fn representations(
    run: &RunArtifact,
    id: &str,
    concept: usize,
    hops: usize,
    top_m: usize,
    ordering: Ordering,
) -> CliResult<Vec<Representation>> {
    let model = run.concept_model(id)?;
    if concept >= model.num_concepts() {
        return Err(Error::NotFound(format!("concept {concept} of model {id}")).into());
    }
    if top_m == 0 {
        return Err(CliError::validation("top", "must be at least 1"));
    }
    if let Ordering::NearestToInstance { node } = ordering {
        if model.assignments().get(node) != Some(&concept) {
            return Err(CliError::validation("order", format!("node {node} is not a member of concept {concept}")));
        }
    }
    Ok(top_representations(model, &run.dataset, &RepresentationQuery { concept, hops, top_m, ordering })?)
}

pub fn node_explanation(run: &RunArtifact, id: &str, node: usize, hops: usize, top_m: usize) -> CliResult<NodeExplanation> {
    if top_m == 0 {
        return Err(CliError::validation("top", "must be at least 1"));
    }
    Ok(explain_node(run.concept_model(id)?, &run.dataset, &run.manifest.predictions, node, hops, top_m)?)
}

pub fn graph_explanation(
    run: &RunArtifact,
    id: &str,
    graph: usize,
    hops: usize,
    top_concepts: usize,
) -> CliResult<GraphExplanation> {
    Ok(explain_graph(run.concept_model(id)?, &run.dataset, &run.manifest.predictions, graph, hops, top_concepts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationPoints {
    pub layer: usize,
    pub dims: usize,
    pub points: Vec<Vec<f64>>,
    /// Class of each row (node label, or graph label for graph-level rows).
    pub labels: Vec<usize>,
    /// Concept of each row when a concept model was named; `null` marks noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<Option<usize>>>,
}

pub fn activations(run: &RunArtifact, layer: usize, dr: Option<&str>, model: Option<&str>) -> CliResult<ActivationPoints> {
    let rows = run.trace.layers.get(layer).ok_or_else(|| CliError::validation("layer", format!("layer {layer} does not exist")))?;
    let points = match parse_reduction(dr.or(Some("pca:2")))? {
        gcx_core::concepts::Reduction::Raw => rows.clone(),
        gcx_core::concepts::Reduction::Pca { dims } => {
            if dims > rows.ncols() {
                return Err(CliError::validation("dr", format!("layer {layer} has only {} dimensions", rows.ncols())));
            }
            Pca::fit(rows.view(), dims)?.transform(rows.view())?
        }
    };
    let units = run.dataset.unit_labels();
    let node_rows = run.trace.units[layer] == gcx_core::gnn::TraceUnit::Node;
    let labels = if node_rows && run.dataset.task() == Task::GraphClassification {
        let offsets = run.dataset.node_offsets();
        (0..run.dataset.graphs().len()).flat_map(|g| std::iter::repeat_n(units[g], offsets[g + 1] - offsets[g])).collect()
    } else {
        units
    };
    let concepts = match model {
        Some(id) => {
            let m = run.concept_model(id)?;
            if !node_rows || m.layer != layer {
                return Err(CliError::validation("model", format!("concept model {id} was fitted on layer {}", m.layer)));
            }
            Some(m.assignments().iter().map(|&c| (c != NOISE).then_some(c)).collect())
        }
        None => None,
    };
    Ok(ActivationPoints {
        layer,
        dims: points.ncols(),
        points: points.rows().into_iter().map(|r| r.to_vec()).collect(),
        labels,
        concepts,
    })
}
