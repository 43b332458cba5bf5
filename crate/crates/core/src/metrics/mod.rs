//! Concept quality scores: completeness, purity and heuristic recovery.

mod heuristics;
mod purity;
mod tree;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::NOISE;
use crate::concepts::{check_coverage, concept_contribution, ConceptModel};
use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

pub use heuristics::{heuristic_recovery_count, heuristic_templates, Heuristic, HeuristicReport, HEURISTIC_NAMES};
pub use purity::{concept_purity, ConceptPurity, PurityOptions, PurityReport, SkipReason};
pub use tree::{DecisionTree, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    /// Held-out accuracy of the tree.
    pub score: f64,
    pub tree_depth: usize,
    pub leaf_count: usize,
    pub train_units: usize,
    pub test_units: usize,
    /// Units left out because their concept is noise.
    pub excluded_noise: usize,
    pub split_seed: u64,
}

/// Per-unit concept inputs: one-hot concept indicators for node tasks, the
/// normalised concept histogram of each graph for graph tasks. Noise rows are `None`.
pub fn concept_features(model: &ConceptModel, dataset: &Dataset) -> Result<Vec<Option<Vec<f64>>>> {
    check_coverage(model, dataset)?;
    let k = model.num_concepts();
    match dataset.task() {
        Task::NodeClassification => Ok(model
            .assignments()
            .iter()
            .map(|&c| {
                (c != NOISE).then(|| {
                    let mut row = vec![0.0; k];
                    row[c] = 1.0;
                    row
                })
            })
            .collect()),
        Task::GraphClassification => (0..dataset.graphs().len())
            .map(|g| {
                let h = concept_contribution(model, dataset, g)?;
                let total = h.total().max(1) as f64;
                Ok(Some(h.counts.iter().map(|&c| c as f64 / total).collect()))
            })
            .collect(),
    }
}

/// Trains a decision tree on the training split's concept inputs and reports
/// its accuracy on the test split.
pub fn concept_completeness(model: &ConceptModel, dataset: &Dataset) -> Result<CompletenessReport> {
    let features = concept_features(model, dataset)?;
    let labels = dataset.unit_labels();
    let mask = dataset.train_mask();
    let k = model.num_concepts();
    let pick = |train: bool| -> (Array2<f64>, Vec<usize>) {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| mask[i] == train && features[i].is_some()).collect();
        let x = Array2::from_shape_fn((rows.len(), k), |(r, j)| features[rows[r]].as_ref().unwrap()[j]);
        (x, rows.iter().map(|&i| labels[i]).collect())
    };
    let (train_x, train_y) = pick(true);
    let (test_x, test_y) = pick(false);
    let tree = DecisionTree::fit(train_x.view(), &train_y, dataset.num_classes())?;
    let hits = test_x.rows().into_iter().zip(&test_y).filter(|(row, &y)| tree.predict(*row) == y).count();
    Ok(CompletenessReport {
        score: if test_y.is_empty() { 0.0 } else { hits as f64 / test_y.len() as f64 },
        tree_depth: tree.depth(),
        leaf_count: tree.leaf_count(),
        train_units: train_y.len(),
        test_units: test_y.len(),
        excluded_noise: features.iter().filter(|f| f.is_none()).count(),
        split_seed: dataset.seed(),
    })
}

/// Test-split accuracy of predicting each concept's majority training class
/// (lowest class on ties). Node tasks only; concepts unseen in training predict class 0.
pub fn majority_vote_completeness(model: &ConceptModel, dataset: &Dataset) -> Result<f64> {
    check_coverage(model, dataset)?;
    if dataset.task() != Task::NodeClassification {
        return Err(Error::input("majority-vote completeness applies to node tasks"));
    }
    let labels = dataset.unit_labels();
    let mask = dataset.train_mask();
    let assignments = model.assignments();
    let mut votes = vec![vec![0usize; dataset.num_classes()]; model.num_concepts()];
    for i in (0..labels.len()).filter(|&i| mask[i] && assignments[i] != NOISE) {
        votes[assignments[i]][labels[i]] += 1;
    }
    let majority: Vec<usize> = votes
        .iter()
        .map(|v| (0..v.len()).fold(0, |best, c| if v[c] > v[best] { c } else { best }))
        .collect();
    let test: Vec<usize> = (0..labels.len()).filter(|&i| !mask[i] && assignments[i] != NOISE).collect();
    if test.is_empty() {
        return Ok(0.0);
    }
    let hits = test.iter().filter(|&&i| majority[assignments[i]] == labels[i]).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Silhouette is quadratic in the node count; larger models report none.
pub const SILHOUETTE_POINT_LIMIT: usize = 20_000;

/// Every score of one concept model at one `(hops, top_m)` setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub hops: usize,
    pub top_m: usize,
    pub num_concepts: usize,
    pub completeness: CompletenessReport,
    /// `None` when every concept was skipped.
    pub purity: Option<PurityReport>,
    /// Only for the house-motif datasets.
    pub heuristics: Option<HeuristicReport>,
    pub silhouette: Option<f64>,
}

/// Silhouette of the model's clustering, when it is defined and affordable.
pub fn model_silhouette(model: &ConceptModel) -> Option<f64> {
    (model.points.nrows() <= SILHOUETTE_POINT_LIMIT)
        .then(|| crate::clustering::silhouette(model.points.view(), &model.clustering).ok())
        .flatten()
}

pub fn score_concepts(model: &ConceptModel, dataset: &Dataset, hops: usize, top_m: usize) -> Result<ScoreReport> {
    let completeness = concept_completeness(model, dataset)?;
    let mut options = PurityOptions { top_m, ..PurityOptions::new(hops) };
    if dataset.graphs().iter().all(|g| g.node_tags().is_some()) {
        options.costs = options.costs.with_tags();
    }
    let purity = match concept_purity(model, dataset, &options) {
        Ok(p) => Some(p),
        Err(Error::EmptyReport) => None,
        Err(e) => return Err(e),
    };
    let heuristics = match dataset.name.as_str() {
        "ba_shapes" | "ba_community" => Some(heuristic_recovery_count(model, dataset, hops)?),
        _ => None,
    };
    Ok(ScoreReport {
        hops,
        top_m,
        num_concepts: model.num_concepts(),
        completeness,
        purity,
        heuristics,
        silhouette: model_silhouette(model),
    })
}
