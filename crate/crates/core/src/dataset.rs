use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    GraphClassification,
}

/// Labeled graphs plus a fixed 80:20 train/test split over classification units
/// (nodes of the single graph, or whole graphs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    graphs: Vec<Graph>,
    task: Task,
    num_classes: usize,
    class_names: Vec<String>,
    train_mask: Vec<bool>,
    seed: u64,
    node_offsets: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        task: Task,
        num_classes: usize,
        class_names: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        if class_names.len() != num_classes {
            return Err(Error::input("one class name per class is required"));
        }
        match task {
            Task::NodeClassification => {
                if graphs.len() != 1 {
                    return Err(Error::input("node classification needs exactly one graph"));
                }
                let labels = graphs[0]
                    .node_labels()
                    .ok_or_else(|| Error::input("node classification graph has no node labels"))?;
                if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
                    return Err(Error::input(format!("node label {l} >= {num_classes} classes")));
                }
            }
            Task::GraphClassification => {
                if graphs.is_empty() {
                    return Err(Error::input("graph classification needs at least one graph"));
                }
                for (i, g) in graphs.iter().enumerate() {
                    match g.graph_label() {
                        Some(l) if l < num_classes => {}
                        Some(l) => {
                            return Err(Error::input(format!("graph {i} label {l} >= {num_classes}")))
                        }
                        None => return Err(Error::input(format!("graph {i} has no label"))),
                    }
                }
            }
        }
        let dim = graphs[0].feature_dim();
        if graphs.iter().any(|g| g.feature_dim() != dim) {
            return Err(Error::input("all graphs must share one feature dimension"));
        }
        let mut node_offsets = Vec::with_capacity(graphs.len() + 1);
        let mut total = 0;
        node_offsets.push(0);
        for g in &graphs {
            total += g.num_nodes();
            node_offsets.push(total);
        }
        let units = match task {
            Task::NodeClassification => graphs[0].num_nodes(),
            Task::GraphClassification => graphs.len(),
        };
        Ok(Dataset {
            name: name.into(),
            graphs,
            task,
            num_classes,
            class_names,
            train_mask: split_mask(units, seed),
            seed,
            node_offsets,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn graph(&self, id: usize) -> Result<&Graph> {
        self.graphs
            .get(id)
            .ok_or_else(|| Error::input(format!("graph {id} out of range ({} graphs)", self.graphs.len())))
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs[0].feature_dim()
    }

    pub fn num_units(&self) -> usize {
        self.train_mask.len()
    }

    /// Train membership per unit; `false` means test.
    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    /// Class label per unit.
    pub fn unit_labels(&self) -> Vec<usize> {
        match self.task {
            Task::NodeClassification => self.graphs[0].node_labels().expect("validated").to_vec(),
            Task::GraphClassification => self
                .graphs
                .iter()
                .map(|g| g.graph_label().expect("validated"))
                .collect(),
        }
    }

    /// Total node count across all graphs.
    pub fn total_nodes(&self) -> usize {
        *self.node_offsets.last().unwrap()
    }

    /// Global id of each graph's first node; one trailing entry holds the total.
    pub fn node_offsets(&self) -> &[usize] {
        &self.node_offsets
    }

    /// Maps a global node id to `(graph id, local node id)`.
    pub fn locate(&self, global: usize) -> Result<(usize, usize)> {
        if global >= self.total_nodes() {
            return Err(Error::input(format!(
                "node {global} out of range ({} nodes)",
                self.total_nodes()
            )));
        }
        let g = self.node_offsets.partition_point(|&o| o <= global) - 1;
        Ok((g, global - self.node_offsets[g]))
    }

    pub fn global_id(&self, graph: usize, local: usize) -> usize {
        self.node_offsets[graph] + local
    }
}

fn split_mask(units: usize, seed: u64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut rng::seeded(seed, rng::streams::SPLIT));
    let train = (units as f64 * TRAIN_FRACTION).round() as usize;
    let mut mask = vec![false; units];
    for &i in &order[..train] {
        mask[i] = true;
    }
    mask
}
