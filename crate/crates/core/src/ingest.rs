use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::graph::{CanonicalGraph, Graph};

/// A corpus in TU text format: `<prefix>_A.txt`, `<prefix>_graph_indicator.txt`,
/// `<prefix>_graph_labels.txt` and optionally `<prefix>_node_labels.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuCorpus {
    pub dir: PathBuf,
    pub prefix: String,
}

impl TuCorpus {
    pub fn new(dir: impl Into<PathBuf>, prefix: impl Into<String>) -> Self {
        TuCorpus { dir: dir.into(), prefix: prefix.into() }
    }

    fn file(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}.txt", self.prefix))
    }
}

fn read_ints(path: &Path) -> Result<Vec<i64>> {
    let name = path.display().to_string();
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::format(&name, format!("line {}: expected an integer, got {l:?}", i + 1)))
        })
        .collect()
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let name = path.display().to_string();
    let mut edges = Vec::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Vec<usize> = line
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(&name, format!("line {}: expected \"u, v\", got {line:?}", i + 1)))?;
        match parsed[..] {
            [u, v] if u >= 1 && v >= 1 => edges.push((u - 1, v - 1)),
            _ => return Err(Error::format(&name, format!("line {}: expected two 1-based ids, got {line:?}", i + 1))),
        }
    }
    Ok(edges)
}

/// Dense re-labelling of the distinct values, in ascending order.
fn dense_ids(values: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let distinct: Vec<i64> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<i64, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (values.iter().map(|v| index[v]).collect(), distinct)
}

/// Loads a graph-classification dataset. Node tags, when present, become
/// one-hot features; otherwise every node gets the constant feature 1.
pub fn load_tu_dataset(corpus: &TuCorpus, seed: u64) -> Result<Dataset> {
    let indicator_path = corpus.file("graph_indicator");
    let indicator_name = indicator_path.display().to_string();
    let indicator = read_ints(&indicator_path)?;
    let graph_labels = read_ints(&corpus.file("graph_labels"))?;
    let edges_path = corpus.file("A");
    let edges = read_edges(&edges_path)?;
    let node_labels_path = corpus.file("node_labels");
    let tags = if node_labels_path.exists() { Some(read_ints(&node_labels_path)?) } else { None };

    let num_graphs = graph_labels.len();
    if num_graphs == 0 {
        return Err(Error::format(corpus.file("graph_labels").display().to_string(), "no graphs"));
    }
    let mut owner = Vec::with_capacity(indicator.len());
    for (i, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(Error::format(&indicator_name, format!("node {} references nonexistent graph {g}", i + 1)));
        }
        owner.push(g as usize - 1);
    }
    let mut sizes = vec![0usize; num_graphs];
    let mut local = Vec::with_capacity(owner.len());
    for &g in &owner {
        local.push(sizes[g]);
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::format(&indicator_name, format!("graph {} has no nodes", g + 1)));
    }
    if let Some(t) = &tags {
        if t.len() != owner.len() {
            return Err(Error::format(
                node_labels_path.display().to_string(),
                format!("{} labels for {} nodes", t.len(), owner.len()),
            ));
        }
    }

    let edges_name = edges_path.display().to_string();
    let mut per_graph: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for &(u, v) in &edges {
        if u >= owner.len() || v >= owner.len() {
            return Err(Error::format(&edges_name, format!("edge ({}, {}) has a dangling endpoint", u + 1, v + 1)));
        }
        if owner[u] != owner[v] {
            return Err(Error::format(&edges_name, format!("edge ({}, {}) joins two graphs", u + 1, v + 1)));
        }
        if u != v {
            let (a, b) = (local[u], local[v]);
            per_graph[owner[u]].insert((a.min(b), a.max(b)));
        }
    }

    let (tag_ids, tag_values) = match &tags {
        Some(t) => {
            let (ids, values) = dense_ids(t);
            (Some(ids), values.len())
        }
        None => (None, 0),
    };
    let (labels, label_values) = dense_ids(&graph_labels);
    let mut graph_nodes: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for (node, &g) in owner.iter().enumerate() {
        graph_nodes[g].push(node);
    }
    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let n = sizes[g];
        let mut graph = Graph::new(n, per_graph[g].iter().copied())?;
        graph = match &tag_ids {
            Some(ids) => {
                let node_tags: Vec<usize> = graph_nodes[g].iter().map(|&v| ids[v]).collect();
                let features = Array2::from_shape_fn((n, tag_values), |(i, j)| f64::from(u8::from(node_tags[i] == j)));
                graph.with_features(features)?.with_node_tags(node_tags)?
            }
            None => graph.with_features(Array2::ones((n, 1)))?,
        };
        graphs.push(graph.with_graph_label(Some(labels[g])));
    }
    let class_names = label_values.iter().map(i64::to_string).collect();
    Dataset::new(&corpus.prefix, graphs, Task::GraphClassification, label_values.len(), class_names, seed)
}

/// Self-contained JSON form of a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub name: String,
    pub task: Task,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub graphs: Vec<CanonicalGraph>,
}

impl DatasetDocument {
    pub fn from_dataset(d: &Dataset) -> Self {
        DatasetDocument {
            name: d.name.clone(),
            task: d.task(),
            num_classes: d.num_classes(),
            class_names: d.class_names().to_vec(),
            seed: d.seed(),
            graphs: d.graphs().iter().map(Graph::to_canonical).collect(),
        }
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        let graphs = self.graphs.iter().map(Graph::from_canonical).collect::<Result<_>>()?;
        Dataset::new(&self.name, graphs, self.task, self.num_classes, self.class_names.clone(), self.seed)
    }
}

pub fn export_dataset(d: &Dataset) -> String {
    serde_json::to_string(&DatasetDocument::from_dataset(d)).expect("dataset serializes")
}

pub fn import_dataset(json: &str) -> Result<Dataset> {
    serde_json::from_str::<DatasetDocument>(json)?.to_dataset()
}

/// Writes a dataset back out in TU text format (graph labels as dense class ids).
pub fn write_tu_dataset(d: &Dataset, corpus: &TuCorpus) -> Result<()> {
    if d.task() != Task::GraphClassification {
        return Err(Error::input("TU export needs a graph-classification dataset"));
    }
    fs::create_dir_all(&corpus.dir)?;
    let (mut a, mut indicator, mut labels, mut tags) = (String::new(), String::new(), String::new(), String::new());
    let has_tags = d.graphs().iter().all(|g| g.node_tags().is_some());
    for (g, graph) in d.graphs().iter().enumerate() {
        let offset = d.node_offsets()[g] + 1;
        for &(u, v) in graph.edges() {
            a.push_str(&format!("{}, {}\n{}, {}\n", u + offset, v + offset, v + offset, u + offset));
        }
        for v in 0..graph.num_nodes() {
            indicator.push_str(&format!("{}\n", g + 1));
            if has_tags {
                tags.push_str(&format!("{}\n", graph.node_tags().expect("checked")[v]));
            }
        }
        labels.push_str(&format!("{}\n", graph.graph_label().expect("validated")));
    }
    fs::write(corpus.file("A"), a)?;
    fs::write(corpus.file("graph_indicator"), indicator)?;
    fs::write(corpus.file("graph_labels"), labels)?;
    if has_tags {
        fs::write(corpus.file("node_labels"), tags)?;
    }
    Ok(())
}
