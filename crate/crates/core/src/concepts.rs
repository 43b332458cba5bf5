//! Concepts: clusters in a convolution layer's activation space, plus the
//! queries that turn them into explanations.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::clustering::{self, squared_distance, Clustering, Pca, NOISE};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gnn::{ActivationTrace, TraceUnit};
use crate::graph::{n_hop_neighborhood, Subgraph};

pub const DEFAULT_TOP_M: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Method {
    Kmeans { k: usize },
    AhcWard { num_clusters: usize },
    Dbscan { eps: f64, min_pts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reduction {
    Raw,
    Pca { dims: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub method: Method,
    pub reduction: Reduction,
    pub seed: u64,
    /// k-means seedings tried; the lowest-inertia run is kept.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    1
}

impl DiscoveryConfig {
    pub fn kmeans(k: usize, seed: u64) -> Self {
        DiscoveryConfig { method: Method::Kmeans { k }, reduction: Reduction::Raw, seed, restarts: 1 }
    }

    pub fn ahc(num_clusters: usize) -> Self {
        DiscoveryConfig { method: Method::AhcWard { num_clusters }, reduction: Reduction::Raw, seed: 0, restarts: 1 }
    }

    pub fn dbscan(eps: f64, min_pts: usize) -> Self {
        DiscoveryConfig { method: Method::Dbscan { eps, min_pts }, reduction: Reduction::Raw, seed: 0, restarts: 1 }
    }

    pub fn with_pca(self, dims: usize) -> Self {
        DiscoveryConfig { reduction: Reduction::Pca { dims }, ..self }
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        DiscoveryConfig { restarts, ..self }
    }
}

/// A fitted mapping from a layer's activation space to concept ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptModel {
    pub layer: usize,
    pub config: DiscoveryConfig,
    pub clustering: Clustering,
    pub pca: Option<Pca>,
    /// Fitted rows in clustering space (after any reduction), one per node.
    pub points: Array2<f64>,
    /// Mean of each concept's members in clustering space.
    pub centres: Array2<f64>,
    /// Core flags for density clustering; empty otherwise.
    #[serde(default)]
    pub core: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ordering {
    NearestCentroid,
    NearestToInstance { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationQuery {
    pub concept: usize,
    pub hops: usize,
    pub top_m: usize,
    pub ordering: Ordering,
}

impl RepresentationQuery {
    pub fn nearest_centroid(concept: usize, hops: usize, top_m: usize) -> Self {
        RepresentationQuery { concept, hops, top_m, ordering: Ordering::NearestCentroid }
    }
}

/// One concept member rendered as its n-hop neighbourhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    /// Global node id across the dataset.
    pub node: usize,
    pub graph: usize,
    pub distance: f64,
    pub subgraph: Subgraph,
}

/// Node counts per concept, with DBSCAN noise kept apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub counts: Vec<usize>,
    pub noise: usize,
}

impl Contribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.noise
    }
}

/// Node counts per (class, concept).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassConceptTable {
    pub counts: Array2<usize>,
    /// Noise nodes per class.
    pub noise: Vec<usize>,
}

/// Clusters the node rows of a convolution layer.
pub fn discover_concepts(trace: &ActivationTrace, layer: usize, config: &DiscoveryConfig) -> Result<ConceptModel> {
    let rows = trace.layer(layer)?;
    if !trace.is_conv[layer] || trace.units[layer] != TraceUnit::Node {
        return Err(Error::UnsupportedLayer { layer });
    }
    let pca = match config.reduction {
        Reduction::Raw => None,
        Reduction::Pca { dims } => Some(Pca::fit(rows.view(), dims)?),
    };
    let points = match &pca {
        Some(p) => p.transform(rows.view())?,
        None => rows.clone(),
    };
    let (clustering, core) = match config.method {
        Method::Kmeans { k } => {
            (clustering::kmeans_restarts(points.view(), k, config.seed, config.restarts.max(1))?, Vec::new())
        }
        Method::AhcWard { num_clusters } => (clustering::ahc_ward(points.view(), num_clusters)?.0, Vec::new()),
        Method::Dbscan { eps, min_pts } => {
            let c = clustering::dbscan(points.view(), eps, min_pts)?;
            (c, core_flags(points.view(), eps, min_pts))
        }
    };
    let centres = match &clustering.centroids {
        Some(c) => c.clone(),
        None => clustering::cluster_means(points.view(), &clustering.assignments, clustering.num_clusters),
    };
    Ok(ConceptModel { layer, config: *config, clustering, pca, points, centres, core })
}

fn core_flags(points: ArrayView2<f64>, eps: f64, min_pts: usize) -> Vec<bool> {
    let eps2 = eps * eps;
    points
        .rows()
        .into_iter()
        .map(|p| points.rows().into_iter().filter(|q| squared_distance(p, *q) <= eps2).count() >= min_pts)
        .collect()
}

impl ConceptModel {
    pub fn num_concepts(&self) -> usize {
        self.clustering.num_clusters
    }

    pub fn assignments(&self) -> &[usize] {
        &self.clustering.assignments
    }

    /// Maps a raw layer activation row into clustering space.
    pub fn project(&self, raw: ArrayView1<f64>) -> Result<Vec<f64>> {
        let row = raw.to_owned().insert_axis(ndarray::Axis(0));
        let projected = match &self.pca {
            Some(p) => p.transform(row.view())?,
            None => row,
        };
        Ok(projected.row(0).to_vec())
    }

    /// Members of `concept` in ascending node order.
    pub fn members(&self, concept: usize) -> Result<Vec<usize>> {
        if concept >= self.num_concepts() {
            return Err(Error::NotFound(format!("concept {concept} (model has {})", self.num_concepts())));
        }
        Ok((0..self.points.nrows()).filter(|&i| self.clustering.assignments[i] == concept).collect())
    }
}

/// Concept id for a row in clustering space. Fitted rows get their stored
/// assignment; other rows go to the nearest centroid (k-means), nearest cluster
/// mean (AHC), or the nearest core point's cluster within eps (DBSCAN).
pub fn assign_concept(model: &ConceptModel, row: &[f64]) -> Result<usize> {
    let dim = model.points.ncols();
    if row.len() != dim {
        return Err(Error::input(format!("row has {} dims, concept space has {dim}", row.len())));
    }
    let row = ArrayView1::from(row);
    if let Some(i) = model.points.rows().into_iter().position(|p| p == row) {
        return Ok(model.clustering.assignments[i]);
    }
    match model.config.method {
        Method::Dbscan { eps, .. } => {
            let mut best = (NOISE, f64::INFINITY);
            for (i, p) in model.points.rows().into_iter().enumerate() {
                if model.core[i] {
                    let d = squared_distance(p, row);
                    if d < best.1 {
                        best = (model.clustering.assignments[i], d);
                    }
                }
            }
            Ok(if best.1 <= eps * eps { best.0 } else { NOISE })
        }
        _ => Ok(nearest_row(model.centres.view(), row)),
    }
}

/// Lowest-index row nearest to `x`.
fn nearest_row(rows: ArrayView2<f64>, x: ArrayView1<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, r) in rows.rows().into_iter().enumerate() {
        let d = squared_distance(r, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// The concept's members ranked by distance (ties by node id), rendered as
/// n-hop neighbourhoods. With `NearestToInstance` the instance itself comes first.
pub fn top_representations(
    model: &ConceptModel,
    dataset: &Dataset,
    query: &RepresentationQuery,
) -> Result<Vec<Representation>> {
    check_coverage(model, dataset)?;
    if query.top_m == 0 {
        return Err(Error::input("top_m must be at least 1"));
    }
    let members = model.members(query.concept)?;
    if members.is_empty() {
        return Err(Error::EmptyConcept(query.concept));
    }
    let (reference, first) = match query.ordering {
        Ordering::NearestCentroid => (model.centres.row(query.concept), None),
        Ordering::NearestToInstance { node } => {
            if node >= model.points.nrows() {
                return Err(Error::input(format!("node {node} out of range")));
            }
            (model.points.row(node), Some(node))
        }
    };
    let mut ranked: Vec<(f64, usize)> = members
        .into_iter()
        .filter(|&v| Some(v) != first)
        .map(|v| (squared_distance(model.points.row(v), reference).sqrt(), v))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    first
        .map(|v| (0.0, v))
        .into_iter()
        .chain(ranked)
        .take(query.top_m)
        .map(|(distance, node)| {
            let (graph, local) = dataset.locate(node)?;
            let subgraph = n_hop_neighborhood(dataset.graph(graph)?, local, query.hops)?;
            Ok(Representation { node, graph, distance, subgraph })
        })
        .collect()
}

/// Per-concept node counts for one graph of the dataset.
pub fn concept_contribution(model: &ConceptModel, dataset: &Dataset, graph: usize) -> Result<Contribution> {
    check_coverage(model, dataset)?;
    if graph >= dataset.graphs().len() {
        return Err(Error::input(format!("graph {graph} out of range ({} graphs)", dataset.graphs().len())));
    }
    let offsets = dataset.node_offsets();
    let mut counts = vec![0; model.num_concepts()];
    let mut noise = 0;
    for &c in &model.clustering.assignments[offsets[graph]..offsets[graph + 1]] {
        if c == NOISE {
            noise += 1;
        } else {
            counts[c] += 1;
        }
    }
    Ok(Contribution { counts, noise })
}

/// Contingency table of node class against concept. Node classes are node
/// labels (node tasks) or the owning graph's label (graph tasks); `predictions`
/// replaces the actual labels with per-unit predicted classes.
pub fn class_concept_distribution(
    model: &ConceptModel,
    dataset: &Dataset,
    predictions: Option<&[usize]>,
) -> Result<ClassConceptTable> {
    check_coverage(model, dataset)?;
    let units = match predictions {
        Some(p) if p.len() != dataset.num_units() => {
            return Err(Error::input("one prediction per unit is required"));
        }
        Some(p) => p.to_vec(),
        None => dataset.unit_labels(),
    };
    if let Some(&c) = units.iter().find(|&&c| c >= dataset.num_classes()) {
        return Err(Error::input(format!("class {c} out of range")));
    }
    let node_class = node_classes(dataset, &units);
    let mut counts = Array2::zeros((dataset.num_classes(), model.num_concepts()));
    let mut noise = vec![0; dataset.num_classes()];
    for (&class, &c) in node_class.iter().zip(&model.clustering.assignments) {
        if c == NOISE {
            noise[class] += 1;
        } else {
            counts[[class, c]] += 1;
        }
    }
    Ok(ClassConceptTable { counts, noise })
}

/// Expands per-unit classes to one class per node.
pub(crate) fn node_classes(dataset: &Dataset, units: &[usize]) -> Vec<usize> {
    match dataset.task() {
        crate::dataset::Task::NodeClassification => units.to_vec(),
        crate::dataset::Task::GraphClassification => {
            let offsets = dataset.node_offsets();
            (0..dataset.graphs().len())
                .flat_map(|g| std::iter::repeat_n(units[g], offsets[g + 1] - offsets[g]))
                .collect()
        }
    }
}

pub(crate) fn check_coverage(model: &ConceptModel, dataset: &Dataset) -> Result<()> {
    if model.points.nrows() != dataset.total_nodes() {
        return Err(Error::input(format!(
            "concept model covers {} nodes, dataset has {}",
            model.points.nrows(),
            dataset.total_nodes()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::clustering::Algorithm;
    use crate::dataset::Task;
    use crate::graph::Graph;

    fn trace(rows: Array2<f64>) -> ActivationTrace {
        let n = rows.nrows();
        ActivationTrace {
            layers: vec![rows, Array2::zeros((n, 2))],
            units: vec![TraceUnit::Node, TraceUnit::Node],
            is_conv: vec![true, false],
            last_conv: 0,
        }
    }

    fn path_dataset() -> Dataset {
        let g = Graph::new(6, (0..5).map(|v| (v, v + 1)))
            .unwrap()
            .with_node_labels(vec![0, 0, 0, 1, 1, 1])
            .unwrap()
            .with_features(Array2::ones((6, 1)))
            .unwrap();
        Dataset::new("path", vec![g], Task::NodeClassification, 2, vec!["a".into(), "b".into()], 0).unwrap()
    }

    fn rows() -> Array2<f64> {
        array![[0.0, 0.0], [0.25, 0.0], [0.5, 0.0], [5.0, 5.0], [5.25, 5.0], [5.5, 5.0]]
    }

    #[test]
    fn rejects_non_conv_layers() {
        let t = trace(rows());
        assert!(matches!(
            discover_concepts(&t, 1, &DiscoveryConfig::kmeans(2, 0)),
            Err(Error::UnsupportedLayer { layer: 1 })
        ));
        assert!(discover_concepts(&t, 5, &DiscoveryConfig::kmeans(2, 0)).is_err());
    }

    #[test]
    fn single_concept_covers_everything() {
        let m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::kmeans(1, 0)).unwrap();
        assert!(m.assignments().iter().all(|&c| c == 0));
        let c = concept_contribution(&m, &path_dataset(), 0).unwrap();
        assert_eq!(c.counts, vec![6]);
    }

    #[test]
    fn fitted_rows_reassign_to_themselves() {
        let t = trace(rows());
        for cfg in [DiscoveryConfig::kmeans(2, 3), DiscoveryConfig::ahc(3), DiscoveryConfig::dbscan(0.3, 2)] {
            let m = discover_concepts(&t, 0, &cfg).unwrap();
            for (i, r) in m.points.rows().into_iter().enumerate() {
                assert_eq!(assign_concept(&m, r.as_slice().unwrap()).unwrap(), m.assignments()[i]);
            }
        }
    }

    #[test]
    fn centroid_and_midpoint_assignment() {
        let m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
        let c0 = m.centres.row(0).to_vec();
        assert_eq!(assign_concept(&m, &c0).unwrap(), 0);
        let mid: Vec<f64> = (0..2).map(|j| (m.centres[[0, j]] + m.centres[[1, j]]) / 2.0).collect();
        assert_eq!(assign_concept(&m, &mid).unwrap(), 0);
        assert!(assign_concept(&m, &[1.0]).is_err());
    }

    #[test]
    fn dbscan_assigns_far_rows_to_noise() {
        let m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::dbscan(0.3, 2)).unwrap();
        assert_eq!(assign_concept(&m, &[100.0, 100.0]).unwrap(), NOISE);
        assert_eq!(assign_concept(&m, &[0.05, 0.01]).unwrap(), m.assignments()[0]);
    }

    #[test]
    fn representations_rank_and_anchor() {
        let d = path_dataset();
        let m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
        let c = m.assignments()[0];
        let reps = top_representations(&m, &d, &RepresentationQuery::nearest_centroid(c, 1, 5)).unwrap();
        // Members 0,1,2; node 1 sits on the centroid.
        assert_eq!(reps.iter().map(|r| r.node).collect::<Vec<_>>(), vec![1, 0, 2]);
        assert_eq!(reps[0].subgraph.parent_node_ids, vec![1, 0, 2]);
        let local = RepresentationQuery { ordering: Ordering::NearestToInstance { node: 2 }, ..RepresentationQuery::nearest_centroid(c, 0, 2) };
        let reps = top_representations(&m, &d, &local).unwrap();
        assert_eq!(reps[0].node, 2);
        assert_eq!(reps[1].node, 1);
        assert!(reps.iter().all(|r| r.subgraph.num_nodes() == 1));
    }

    #[test]
    fn empty_concept_is_an_error() {
        let d = path_dataset();
        let mut m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
        m.clustering.assignments = vec![0; 6];
        assert!(matches!(
            top_representations(&m, &d, &RepresentationQuery::nearest_centroid(1, 1, 3)),
            Err(Error::EmptyConcept(1))
        ));
    }

    #[test]
    fn class_table_counts_nodes() {
        let d = path_dataset();
        let m = discover_concepts(&trace(rows()), 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
        let t = class_concept_distribution(&m, &d, None).unwrap();
        assert_eq!(t.counts.sum(), 6);
        assert_eq!(t.counts.sum_axis(ndarray::Axis(1)).to_vec(), vec![3, 3]);
        // Concepts coincide with the two classes.
        assert_eq!(t.counts[[0, m.assignments()[0]]], 3);
        let flipped = class_concept_distribution(&m, &d, Some(&[1, 1, 1, 0, 0, 0])).unwrap();
        assert_eq!(flipped.counts[[1, m.assignments()[0]]], 3);
        assert!(matches!(m.clustering.algorithm, Algorithm::Kmeans { .. }));
    }
}
