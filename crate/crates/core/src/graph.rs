//! Undirected simple graphs, induced subgraphs and the neighbourhood operations
//! every other module builds on.

use std::collections::{HashSet, VecDeque};

use ndarray::{concatenate, Array2, Axis};
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest subgraph accepted by [`is_isomorphic`].
pub const ISOMORPHISM_NODE_LIMIT: usize = 16;

/// A node-attributed undirected simple graph with dense ids `0..num_nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Array2<f64>,
    node_labels: Option<Vec<usize>>,
    node_tags: Option<Vec<usize>>,
    graph_label: Option<usize>,
}

impl Graph {
    /// Builds a graph with zero-width features. Edges may be given in either
    /// orientation; self-loops and repeated edges are rejected.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::input(format!("self-loop on node {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::input(format!("duplicate edge {:?}", w[0])));
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            num_nodes,
            edges: normalized,
            adjacency,
            features: Array2::zeros((num_nodes, 0)),
            node_labels: None,
            node_tags: None,
            graph_label: None,
        })
    }

    pub fn empty() -> Self {
        Graph::new(0, []).expect("empty graph is valid")
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes {
            return Err(Error::input(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.num_nodes
            )));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::input(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.num_nodes
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_node_tags(mut self, tags: Vec<usize>) -> Result<Self> {
        if tags.len() != self.num_nodes {
            return Err(Error::input(format!(
                "{} node tags for {} nodes",
                tags.len(),
                self.num_nodes
            )));
        }
        self.node_tags = Some(tags);
        Ok(self)
    }

    pub fn with_graph_label(mut self, label: Option<usize>) -> Self {
        self.graph_label = label;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn node_tags(&self) -> Option<&[usize]> {
        self.node_tags.as_deref()
    }

    pub fn graph_label(&self) -> Option<usize> {
        self.graph_label
    }

    fn replace_edges(&self, edges: Vec<(usize, usize)>) -> Result<Graph> {
        let mut g = Graph::new(self.num_nodes, edges)?;
        g.features = self.features.clone();
        g.node_labels = self.node_labels.clone();
        g.node_tags = self.node_tags.clone();
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Shortest-path distances from `source`, cut off beyond `max_hops`.
    pub fn bfs_distances(&self, source: usize, max_hops: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            if d == max_hops {
                continue;
            }
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn to_canonical(&self) -> CanonicalGraph {
        CanonicalGraph {
            num_nodes: self.num_nodes,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
            node_labels: self.node_labels.clone(),
            node_tags: self.node_tags.clone(),
            features: (self.feature_dim() > 0)
                .then(|| self.features.rows().into_iter().map(|r| r.to_vec()).collect()),
            graph_label: self.graph_label,
        }
    }

    pub fn from_canonical(c: &CanonicalGraph) -> Result<Graph> {
        let mut g = Graph::new(c.num_nodes, c.edges.iter().map(|e| (e[0], e[1])))?;
        if let Some(rows) = &c.features {
            let dim = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != dim) {
                return Err(Error::input("ragged feature rows"));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let features = Array2::from_shape_vec((rows.len(), dim), flat)
                .map_err(|e| Error::input(e.to_string()))?;
            g = g.with_features(features)?;
        }
        if let Some(labels) = &c.node_labels {
            g = g.with_node_labels(labels.clone())?;
        }
        if let Some(tags) = &c.node_tags {
            g = g.with_node_tags(tags.clone())?;
        }
        Ok(g.with_graph_label(c.graph_label))
    }

    /// Byte-stable JSON form: edges sorted, optional fields omitted when absent.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_canonical()).expect("canonical graph serializes")
    }
}

/// Serialized form of a [`Graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalGraph {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_tags: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_label: Option<usize>,
}

/// Induced subgraph of a parent graph, with anchor ("clustered") nodes marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    /// Original node id of every local node, in local-id order.
    pub parent_node_ids: Vec<usize>,
    /// Local edges `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Local ids of the anchor nodes, sorted.
    pub anchor_ids: Vec<usize>,
    pub hop_radius: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_tags: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<Vec<usize>>,
}

impl Subgraph {
    /// A free-standing subgraph whose parent ids are its local ids.
    pub fn from_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        anchors: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let g = Graph::new(num_nodes, edges)?;
        let mut anchor_ids: Vec<usize> = anchors.into_iter().collect();
        anchor_ids.sort_unstable();
        anchor_ids.dedup();
        if anchor_ids.iter().any(|&a| a >= num_nodes) {
            return Err(Error::input("anchor outside subgraph"));
        }
        Ok(Subgraph {
            parent_node_ids: (0..num_nodes).collect(),
            edges: g.edges,
            anchor_ids,
            hop_radius: 0,
            node_tags: None,
            node_labels: None,
        })
    }

    pub fn with_tags(mut self, tags: Vec<usize>) -> Result<Self> {
        if tags.len() != self.num_nodes() {
            return Err(Error::input("tag count does not match subgraph size"));
        }
        self.node_tags = Some(tags);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.parent_node_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_anchor(&self, local: usize) -> bool {
        self.anchor_ids.binary_search(&local).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Adjacency rows as bitmasks; only valid for subgraphs of at most 32 nodes.
    pub(crate) fn adjacency_masks(&self) -> Vec<u32> {
        debug_assert!(self.num_nodes() <= 32);
        let mut masks = vec![0u32; self.num_nodes()];
        for &(u, v) in &self.edges {
            masks[u] |= 1 << v;
            masks[v] |= 1 << u;
        }
        masks
    }

    pub fn to_graph(&self) -> Graph {
        let g = Graph::new(self.num_nodes(), self.edges.iter().copied())
            .expect("subgraph edges are simple");
        match &self.node_tags {
            Some(t) => g.with_node_tags(t.clone()).expect("tag count checked"),
            None => g,
        }
    }
}

/// Induced subgraph on every node within `n` hops of `node`; the node is the
/// sole anchor and always local id 0. Remaining nodes are ordered by distance,
/// then by original id.
pub fn n_hop_neighborhood(g: &Graph, node: usize, n: usize) -> Result<Subgraph> {
    if node >= g.num_nodes() {
        return Err(Error::input(format!(
            "node {node} out of range for graph with {} nodes",
            g.num_nodes()
        )));
    }
    let dist = g.bfs_distances(node, n);
    let mut members: Vec<(usize, usize)> = dist
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.map(|d| (d, v)))
        .collect();
    members.sort_unstable();
    let parent_node_ids: Vec<usize> = members.into_iter().map(|(_, v)| v).collect();
    Ok(induced(g, parent_node_ids, vec![0], n))
}

/// Subgraph induced by `parent_node_ids` (kept in the given order).
pub fn induced(g: &Graph, parent_node_ids: Vec<usize>, anchor_ids: Vec<usize>, hop_radius: usize) -> Subgraph {
    let mut local = vec![usize::MAX; g.num_nodes()];
    for (i, &v) in parent_node_ids.iter().enumerate() {
        local[v] = i;
    }
    let mut edges = Vec::new();
    for (i, &v) in parent_node_ids.iter().enumerate() {
        for &w in g.neighbors(v) {
            let j = local[w];
            if j != usize::MAX && i < j {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    let pick = |src: Option<&[usize]>| src.map(|s| parent_node_ids.iter().map(|&v| s[v]).collect());
    Subgraph {
        node_tags: pick(g.node_tags()),
        node_labels: pick(g.node_labels()),
        parent_node_ids,
        edges,
        anchor_ids,
        hop_radius,
    }
}

/// Disjoint union; `g2`'s node ids are shifted by `g1.num_nodes()`.
pub fn disjoint_union(g1: &Graph, g2: &Graph) -> Result<Graph> {
    if g1.num_nodes() == 0 {
        return Ok(g2.clone());
    }
    if g2.num_nodes() == 0 {
        return Ok(g1.clone());
    }
    if g1.feature_dim() != g2.feature_dim() {
        return Err(Error::input(format!(
            "feature dimensions differ: {} vs {}",
            g1.feature_dim(),
            g2.feature_dim()
        )));
    }
    let offset = g1.num_nodes();
    let edges = g1
        .edges()
        .iter()
        .copied()
        .chain(g2.edges().iter().map(|&(u, v)| (u + offset, v + offset)));
    let mut g = Graph::new(offset + g2.num_nodes(), edges)?;
    g.features = concatenate(Axis(0), &[g1.features.view(), g2.features.view()])
        .expect("feature widths match");
    let concat = |a: Option<&[usize]>, b: Option<&[usize]>| match (a, b) {
        (Some(a), Some(b)) => Some([a, b].concat()),
        _ => None,
    };
    g.node_labels = concat(g1.node_labels(), g2.node_labels());
    g.node_tags = concat(g1.node_tags(), g2.node_tags());
    Ok(g)
}

/// Adds exactly `count` new edges drawn uniformly from the absent node pairs.
pub fn add_random_edges(g: &Graph, count: usize, rng_seed: u64) -> Result<Graph> {
    let mut rng = rng::seeded(rng_seed, rng::streams::RANDOM_EDGES);
    add_random_edges_with(g, count, &mut rng)
}

pub(crate) fn add_random_edges_with(g: &Graph, count: usize, rng: &mut rng::Rng) -> Result<Graph> {
    let n = g.num_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let absent = total_pairs - g.num_edges();
    if count > absent {
        return Err(Error::input(format!(
            "cannot add {count} edges: only {absent} node pairs are absent"
        )));
    }
    if count == 0 {
        return Ok(g.clone());
    }
    let mut added: Vec<(usize, usize)> = Vec::with_capacity(count);
    if absent <= 4 * count || absent <= 4096 {
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        for i in index::sample(rng, candidates.len(), count) {
            added.push(candidates[i]);
        }
    } else {
        let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(count);
        while added.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let e = (u.min(v), u.max(v));
            if g.has_edge(e.0, e.1) || !seen.insert(e) {
                continue;
            }
            added.push(e);
        }
    }
    let edges = g.edges().iter().copied().chain(added);
    g.replace_edges(edges.collect())
}

/// Exact isomorphism test by backtracking with degree pruning.
pub fn is_isomorphic(s1: &Subgraph, s2: &Subgraph, respect_anchors: bool, respect_tags: bool) -> Result<bool> {
    for s in [s1, s2] {
        if s.num_nodes() > ISOMORPHISM_NODE_LIMIT {
            return Err(Error::Capacity {
                what: "subgraph",
                size: s.num_nodes(),
                limit: ISOMORPHISM_NODE_LIMIT,
            });
        }
    }
    let n = s1.num_nodes();
    if n != s2.num_nodes() || s1.num_edges() != s2.num_edges() {
        return Ok(false);
    }
    let (deg1, deg2) = (s1.degrees(), s2.degrees());
    let mut sorted1 = deg1.clone();
    let mut sorted2 = deg2.clone();
    sorted1.sort_unstable();
    sorted2.sort_unstable();
    if sorted1 != sorted2 {
        return Ok(false);
    }
    if respect_anchors && s1.anchor_ids.len() != s2.anchor_ids.len() {
        return Ok(false);
    }
    let tag_of = |s: &Subgraph, v: usize| s.node_tags.as_ref().map_or(0, |t| t[v]);
    if respect_tags {
        let mut t1: Vec<usize> = (0..n).map(|v| tag_of(s1, v)).collect();
        let mut t2: Vec<usize> = (0..n).map(|v| tag_of(s2, v)).collect();
        t1.sort_unstable();
        t2.sort_unstable();
        if t1 != t2 {
            return Ok(false);
        }
    }

    let adj1 = s1.adjacency_masks();
    let adj2 = s2.adjacency_masks();
    // Map high-degree nodes first; each next node prefers a neighbour of an earlier one.
    let order = search_order(&adj1, &deg1);
    let compatible = |u: usize, v: usize| {
        deg1[u] == deg2[v]
            && (!respect_anchors || s1.is_anchor(u) == s2.is_anchor(v))
            && (!respect_tags || tag_of(s1, u) == tag_of(s2, v))
    };

    fn extend(
        depth: usize,
        order: &[usize],
        mapping: &mut [usize],
        used: &mut u32,
        adj1: &[u32],
        adj2: &[u32],
        compatible: &dyn Fn(usize, usize) -> bool,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let u = order[depth];
        for v in 0..adj2.len() {
            if *used & (1 << v) != 0 || !compatible(u, v) {
                continue;
            }
            let consistent = order[..depth].iter().all(|&w| {
                let x = mapping[w];
                (adj1[u] >> w & 1) == (adj2[v] >> x & 1)
            });
            if !consistent {
                continue;
            }
            mapping[u] = v;
            *used |= 1 << v;
            if extend(depth + 1, order, mapping, used, adj1, adj2, compatible) {
                return true;
            }
            *used &= !(1 << v);
        }
        false
    }

    let mut mapping = vec![usize::MAX; n];
    let mut used = 0u32;
    Ok(extend(0, &order, &mut mapping, &mut used, &adj1, &adj2, &compatible))
}

/// Connected-first ordering: repeatedly take the highest-degree unvisited node
/// adjacent to the visited set (or any, when none is adjacent).
pub(crate) fn search_order(adj: &[u32], deg: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = 0u32;
    let mut frontier = 0u32;
    while order.len() < n {
        let pool = if frontier & !visited != 0 { frontier & !visited } else { !visited };
        let next = (0..n)
            .filter(|&v| pool >> v & 1 == 1)
            .max_by_key(|&v| (deg[v], std::cmp::Reverse(v)))
            .expect("unvisited node remains");
        order.push(next);
        visited |= 1 << next;
        frontier |= adj[next];
    }
    order
}
