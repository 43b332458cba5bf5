//! Synthetic node-classification benchmarks: a base graph (Barabási–Albert or a
//! balanced binary tree) with planted motifs and labels marking motif roles.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, IndexedRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::rng::{self, streams};

/// Edges each new node attaches with in every BA base graph.
pub const BA_ATTACH_M: usize = 5;
pub const BA_BASE_NODES: usize = 300;
pub const TREE_DEPTH: usize = 8;
pub const MOTIF_COUNT: usize = 80;
pub const CYCLE_SIZE: usize = 6;
pub const BA_SHAPES_RANDOM_EDGES: usize = 70;
pub const COMMUNITY_FEATURE_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifKind {
    House,
    Grid3x3,
    Cycle(usize),
}

/// Node-level description of one motif instance in local ids.
struct MotifTemplate {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    /// Class id of each node (base graph is class 0).
    roles: Vec<usize>,
    attach_node: usize,
}

impl MotifKind {
    pub fn num_nodes(&self) -> usize {
        match *self {
            MotifKind::House => 5,
            MotifKind::Grid3x3 => 9,
            MotifKind::Cycle(n) => n,
        }
    }

    fn template(&self) -> Result<MotifTemplate> {
        Ok(match *self {
            // 0,1 are the middle nodes under the roof 4; 2,3 are the bottom.
            MotifKind::House => MotifTemplate {
                num_nodes: 5,
                edges: vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)],
                roles: vec![2, 2, 3, 3, 1],
                attach_node: 0,
            },
            MotifKind::Grid3x3 => {
                let mut edges = Vec::new();
                for r in 0..3 {
                    for c in 0..3 {
                        let v = r * 3 + c;
                        if c < 2 {
                            edges.push((v, v + 1));
                        }
                        if r < 2 {
                            edges.push((v, v + 3));
                        }
                    }
                }
                MotifTemplate { num_nodes: 9, edges, roles: vec![1; 9], attach_node: 0 }
            }
            MotifKind::Cycle(n) => {
                if n < 3 {
                    return Err(Error::input(format!("cycle motif needs at least 3 nodes, got {n}")));
                }
                MotifTemplate {
                    num_nodes: n,
                    edges: (0..n).map(|i| (i, (i + 1) % n)).collect(),
                    roles: vec![1; n],
                    attach_node: 0,
                }
            }
        })
    }

    /// The motif alone, as a graph with local ids.
    pub fn graph(&self) -> Result<Graph> {
        let t = self.template()?;
        Graph::new(t.num_nodes, t.edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseGraph {
    Ba { num_nodes: usize, attach_m: usize },
    BalancedBinaryTree { depth: usize },
}

/// Full recipe for one synthetic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub base: BaseGraph,
    pub motif: MotifKind,
    pub motif_count: usize,
    pub random_edge_count: usize,
    pub seed: u64,
}

/// Result of planting motifs: the graph plus per-node class and motif membership.
#[derive(Debug, Clone)]
pub struct MotifGraph {
    pub graph: Graph,
    pub roles: Vec<usize>,
    /// Motif instance index for motif nodes, `None` for base nodes.
    pub motif_of: Vec<Option<usize>>,
    /// Base node each motif instance hangs from.
    pub attachment_points: Vec<usize>,
    pub base_nodes: usize,
}

/// Barabási–Albert preferential attachment, seeded from a complete graph on
/// `attach_m + 1` nodes.
pub fn generate_ba(num_nodes: usize, attach_m: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng::seeded(seed, streams::BASE_GRAPH);
    generate_ba_with(num_nodes, attach_m, &mut rng)
}

fn generate_ba_with(num_nodes: usize, attach_m: usize, rng: &mut rng::Rng) -> Result<Graph> {
    if attach_m < 1 || num_nodes <= attach_m {
        return Err(Error::input(format!(
            "BA graph needs num_nodes > attach_m >= 1 (got {num_nodes}, {attach_m})"
        )));
    }
    let mut edges = Vec::new();
    // Each node appears once per incident edge, so uniform draws are degree-proportional.
    let mut endpoints = Vec::new();
    for u in 0..=attach_m {
        for v in u + 1..=attach_m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    for new in attach_m + 1..num_nodes {
        let mut targets: Vec<usize> = Vec::with_capacity(attach_m);
        while targets.len() < attach_m {
            let t = *endpoints.choose(rng).expect("seed clique has edges");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new));
            endpoints.extend([t, new]);
        }
    }
    Graph::new(num_nodes, edges)
}

/// Complete binary tree with the root at depth 0; node `i` has children `2i+1`, `2i+2`.
pub fn generate_tree(depth: usize) -> Result<Graph> {
    if depth < 1 {
        return Err(Error::input("tree depth must be at least 1"));
    }
    let n = (1usize << (depth + 1)) - 1;
    Graph::new(n, (1..n).map(|v| ((v - 1) / 2, v)))
}

/// Hangs `count` motif instances off distinct uniformly chosen base nodes, each by
/// a single edge from the motif's attachment node.
pub fn attach_motifs(base: &Graph, kind: MotifKind, count: usize, seed: u64) -> Result<MotifGraph> {
    let mut rng = rng::seeded(seed, streams::MOTIFS);
    attach_motifs_with(base, kind, count, &mut rng)
}

fn attach_motifs_with(base: &Graph, kind: MotifKind, count: usize, rng: &mut rng::Rng) -> Result<MotifGraph> {
    if count == 0 {
        return Err(Error::input("motif count must be at least 1"));
    }
    if base.num_nodes() == 0 {
        return Err(Error::input("cannot attach motifs to an empty graph"));
    }
    let t = kind.template()?;
    let n0 = base.num_nodes();
    let attachment_points: Vec<usize> = if count <= n0 {
        index::sample(rng, n0, count).into_iter().collect()
    } else {
        (0..count).map(|_| rng.random_range(0..n0)).collect()
    };
    let mut edges: Vec<(usize, usize)> = base.edges().to_vec();
    let mut roles = vec![0; n0];
    let mut motif_of = vec![None; n0];
    for (i, &point) in attachment_points.iter().enumerate() {
        let offset = n0 + i * t.num_nodes;
        edges.extend(t.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
        edges.push((point, offset + t.attach_node));
        roles.extend(&t.roles);
        motif_of.extend(std::iter::repeat_n(Some(i), t.num_nodes));
    }
    let graph = Graph::new(n0 + count * t.num_nodes, edges)?;
    Ok(MotifGraph { graph, roles, motif_of, attachment_points, base_nodes: n0 })
}

/// Builds the labeled graph described by `spec` (structure only, no features).
pub fn generate(spec: &SynthSpec) -> Result<MotifGraph> {
    if spec.motif_count < 1 {
        return Err(Error::input("motif_count must be at least 1"));
    }
    let base = match spec.base {
        BaseGraph::Ba { num_nodes, attach_m } => {
            generate_ba_with(num_nodes, attach_m, &mut rng::seeded(spec.seed, streams::BASE_GRAPH))?
        }
        BaseGraph::BalancedBinaryTree { depth } => generate_tree(depth)?,
    };
    let mut planted = attach_motifs_with(
        &base,
        spec.motif,
        spec.motif_count,
        &mut rng::seeded(spec.seed, streams::MOTIFS),
    )?;
    planted.graph = graph::add_random_edges_with(
        &planted.graph,
        spec.random_edge_count,
        &mut rng::seeded(spec.seed, streams::RANDOM_EDGES),
    )?;
    Ok(planted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthName {
    BaShapes,
    BaCommunity,
    BaGrid,
    TreeCycles,
    TreeGrid,
}

impl SynthName {
    pub const ALL: [SynthName; 5] = [
        SynthName::BaShapes,
        SynthName::BaCommunity,
        SynthName::BaGrid,
        SynthName::TreeCycles,
        SynthName::TreeGrid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SynthName::BaShapes => "ba_shapes",
            SynthName::BaCommunity => "ba_community",
            SynthName::BaGrid => "ba_grid",
            SynthName::TreeCycles => "tree_cycles",
            SynthName::TreeGrid => "tree_grid",
        }
    }

    /// Single-community recipe; ba_community is two ba_shapes recipes.
    pub fn spec(&self, seed: u64) -> SynthSpec {
        let ba = BaseGraph::Ba { num_nodes: BA_BASE_NODES, attach_m: BA_ATTACH_M };
        let tree = BaseGraph::BalancedBinaryTree { depth: TREE_DEPTH };
        let tree_nodes = (1usize << (TREE_DEPTH + 1)) - 1;
        let (base, motif, random_edge_count) = match self {
            SynthName::BaShapes | SynthName::BaCommunity => (ba, MotifKind::House, BA_SHAPES_RANDOM_EDGES),
            SynthName::BaGrid => (ba, MotifKind::Grid3x3, BA_BASE_NODES / 10),
            SynthName::TreeCycles => (tree, MotifKind::Cycle(CYCLE_SIZE), tree_nodes / 10),
            SynthName::TreeGrid => (tree, MotifKind::Grid3x3, tree_nodes / 10),
        };
        SynthSpec { base, motif, motif_count: MOTIF_COUNT, random_edge_count, seed }
    }

    pub fn class_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            SynthName::BaShapes => &["base", "top", "middle", "bottom"],
            SynthName::BaCommunity => &[
                "c0-base", "c0-top", "c0-middle", "c0-bottom", "c1-base", "c1-top", "c1-middle", "c1-bottom",
            ],
            SynthName::BaGrid => &["base", "grid"],
            SynthName::TreeGrid => &["tree", "grid"],
            SynthName::TreeCycles => &["tree", "cycle"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for SynthName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown dataset name {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SynthOptions {
    /// Fraction of cross-community node pairs joined by a random edge (ba_community only).
    pub community_bridge_fraction: f64,
}

pub fn build_dataset(name: SynthName, seed: u64) -> Result<Dataset> {
    build_dataset_with(name, seed, SynthOptions::default())
}

pub fn build_dataset_with(name: SynthName, seed: u64, options: SynthOptions) -> Result<Dataset> {
    let graph = match name {
        SynthName::BaCommunity => build_community(seed, options)?,
        _ => {
            let planted = generate(&name.spec(seed))?;
            let n = planted.graph.num_nodes();
            planted
                .graph
                .with_node_labels(planted.roles)?
                .with_features(Array2::ones((n, 1)))?
        }
    };
    let classes = name.class_names();
    Dataset::new(name.as_str(), vec![graph], Task::NodeClassification, classes.len(), classes, seed)
}

/// Seed of the `community`-th ba_shapes instance inside ba_community.
fn community_seed(seed: u64, community: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(community + 1)
}

fn build_community(seed: u64, options: SynthOptions) -> Result<Graph> {
    let mut feature_rng = rng::seeded(seed, streams::FEATURES);
    let half = COMMUNITY_FEATURE_DIM / 2;
    let mut union = Graph::empty();
    for c in 0..2u64 {
        let planted = generate(&SynthName::BaShapes.spec(community_seed(seed, c)))?;
        let n = planted.graph.num_nodes();
        let mut features = Array2::zeros((n, COMMUNITY_FEATURE_DIM));
        for i in 0..n {
            for d in 0..half {
                features[[i, c as usize * half + d]] = feature_rng.sample::<f64, _>(StandardNormal);
            }
        }
        let labels = planted.roles.iter().map(|&r| r + 4 * c as usize).collect();
        let g = planted.graph.with_node_labels(labels)?.with_features(features)?;
        union = graph::disjoint_union(&union, &g)?;
    }
    let per = union.num_nodes() / 2;
    let bridges = (options.community_bridge_fraction * (per * per) as f64).round() as usize;
    if bridges == 0 {
        return Ok(union);
    }
    let mut rng = rng::seeded(seed, streams::BRIDGES);
    let picks = index::sample(&mut rng, per * per, bridges);
    let edges = union
        .edges()
        .iter()
        .copied()
        .chain(picks.into_iter().map(|p| (p / per, per + p % per)));
    let bridged = Graph::new(union.num_nodes(), edges)?
        .with_node_labels(union.node_labels().unwrap().to_vec())?
        .with_features(union.features().clone())?;
    Ok(bridged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{induced, is_isomorphic, Subgraph};

    #[test]
    fn ba_with_m_one_is_a_tree() {
        let g = generate_ba(5, 1, 0).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_edges(), 4);
        let dist = g.bfs_distances(0, usize::MAX);
        assert!(dist.iter().all(Option::is_some));
    }

    #[test]
    fn ba_is_seeded() {
        let g = generate_ba(300, 5, 42).unwrap();
        assert_eq!(g.num_nodes(), 300);
        assert_eq!(g.num_edges(), 15 + 294 * 5);
        assert_eq!(g, generate_ba(300, 5, 42).unwrap());
        assert!(generate_ba(5, 5, 0).is_err());
        assert!(generate_ba(5, 0, 0).is_err());
    }

    #[test]
    fn tree_shapes() {
        let t1 = generate_tree(1).unwrap();
        assert_eq!((t1.num_nodes(), t1.num_edges()), (3, 2));
        let t8 = generate_tree(8).unwrap();
        assert_eq!(t8.num_nodes(), 511);
        let internal = (0..511).filter(|&v| 2 * v + 2 < 511);
        for v in internal {
            let children = t8.neighbors(v).iter().filter(|&&w| w > v).count();
            assert_eq!(children, 2);
        }
    }

    #[test]
    fn houses_and_cycles_counting() {
        let base = generate_ba(300, 5, 1).unwrap();
        let houses = attach_motifs(&base, MotifKind::House, 80, 1).unwrap();
        assert_eq!(houses.graph.num_nodes(), 700);
        let cross = houses
            .graph
            .edges()
            .iter()
            .filter(|&&(u, v)| (u < 300) != (v < 300))
            .count();
        assert_eq!(cross, 80);

        let cyc = attach_motifs(&base, MotifKind::Cycle(6), 1, 1).unwrap();
        assert_eq!(cyc.graph.num_nodes(), 306);
        assert_eq!(cyc.graph.num_edges(), base.num_edges() + 7);
        assert!(attach_motifs(&base, MotifKind::House, 0, 1).is_err());
    }

    #[test]
    fn ba_shapes_class_counts() {
        let d = build_dataset(SynthName::BaShapes, 0).unwrap();
        let mut counts = [0; 4];
        for l in d.unit_labels() {
            counts[l] += 1;
        }
        assert_eq!(counts, [300, 80, 160, 160]);
        assert_eq!(d.graphs()[0].num_edges(), 15 + 294 * 5 + 80 * 7 + 70);
    }

    #[test]
    fn dataset_sizes_and_classes() {
        let c = build_dataset(SynthName::BaCommunity, 0).unwrap();
        assert_eq!(c.total_nodes(), 1400);
        assert_eq!(c.num_classes(), 8);
        assert_eq!(c.feature_dim(), COMMUNITY_FEATURE_DIM);
        let t = build_dataset(SynthName::TreeCycles, 0).unwrap();
        assert_eq!(t.num_classes(), 2);
        assert_eq!(t.total_nodes(), 511 + 480);
        let g = build_dataset(SynthName::TreeGrid, 0).unwrap();
        assert_eq!(g.total_nodes(), 511 + 720);
        assert_eq!(build_dataset(SynthName::BaGrid, 0).unwrap().class_names()[1], "grid");
        assert!("ba_houses".parse::<SynthName>().is_err());
    }

    #[test]
    fn community_bridges_are_optional() {
        let plain = build_dataset(SynthName::BaCommunity, 4).unwrap();
        let bridged =
            build_dataset_with(SynthName::BaCommunity, 4, SynthOptions { community_bridge_fraction: 0.001 }).unwrap();
        assert_eq!(bridged.graphs()[0].num_edges(), plain.graphs()[0].num_edges() + 490);
    }

    #[test]
    fn dataset_is_reproducible() {
        for name in SynthName::ALL {
            assert_eq!(build_dataset(name, 7).unwrap(), build_dataset(name, 7).unwrap());
        }
    }

    #[test]
    fn motif_instances_match_template_before_noise() {
        for (kind, base) in [
            (MotifKind::House, generate_ba(300, 5, 3).unwrap()),
            (MotifKind::Grid3x3, generate_tree(8).unwrap()),
            (MotifKind::Cycle(6), generate_tree(8).unwrap()),
        ] {
            let planted = attach_motifs(&base, kind, 80, 3).unwrap();
            let t = kind.template().unwrap();
            let canonical = Subgraph::from_edges(t.num_nodes, t.edges.clone(), []).unwrap();
            for i in 0..80 {
                let members: Vec<usize> = (0..planted.graph.num_nodes())
                    .filter(|&v| planted.motif_of[v] == Some(i))
                    .collect();
                let sub = induced(&planted.graph, members, vec![], 0);
                assert!(is_isomorphic(&sub, &canonical, false, false).unwrap());
            }
            for v in 0..planted.base_nodes {
                assert_eq!(planted.roles[v], 0);
                assert!(planted.motif_of[v].is_none());
            }
        }
    }
}
