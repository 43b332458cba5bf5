//! Exact graph edit distance between small subgraphs.
//!
//! Best-first search over partial node mappings. The lower bound for the
//! unmapped remainder is a linear assignment over node pairs whose costs cover
//! the node operation, the now-determined edges to already-mapped nodes, and
//! half of the unavoidable edge mismatches among the remaining nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{search_order, Subgraph};

pub const DEFAULT_NODE_LIMIT: usize = 15;
/// Search states generated before a query is reported as exceeded.
pub const DEFAULT_SEARCH_BUDGET: usize = 10_000_000;
/// Widest subgraph the bitmask search can represent.
pub const MAX_NODE_LIMIT: usize = 32;
pub const ORACLE_NODE_LIMIT: usize = 5;

const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditCostConfig {
    pub node_insert: f64,
    pub node_delete: f64,
    /// Charged only when `respect_tags` is set and the two tags differ.
    pub node_substitute: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
    pub respect_tags: bool,
}

impl Default for EditCostConfig {
    fn default() -> Self {
        EditCostConfig {
            node_insert: 1.0,
            node_delete: 1.0,
            node_substitute: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
            respect_tags: false,
        }
    }
}

impl EditCostConfig {
    pub fn with_tags(self) -> Self {
        EditCostConfig { respect_tags: true, ..self }
    }

    /// Every cost multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        EditCostConfig {
            node_insert: self.node_insert * factor,
            node_delete: self.node_delete * factor,
            node_substitute: self.node_substitute * factor,
            edge_insert: self.edge_insert * factor,
            edge_delete: self.edge_delete * factor,
            respect_tags: self.respect_tags,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let costs = [self.node_insert, self.node_delete, self.node_substitute, self.edge_insert, self.edge_delete];
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::input("edit costs must be finite and non-negative"));
        }
        Ok(())
    }

    fn substitute(&self, t1: usize, t2: usize) -> f64 {
        if self.respect_tags && t1 != t2 {
            self.node_substitute
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceededBy {
    NodeLimit,
    SearchBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GedResult {
    Distance {
        distance: f64,
        /// Image of each node of the first graph; `None` means deleted.
        mapping: Vec<Option<usize>>,
    },
    Exceeded { limit: usize, by: ExceededBy },
}

impl GedResult {
    pub fn distance(&self) -> Option<f64> {
        match self {
            GedResult::Distance { distance, .. } => Some(*distance),
            GedResult::Exceeded { .. } => None,
        }
    }
}

/// Exact GED with the default search budget. Anchors play no role.
pub fn graph_edit_distance(
    g1: &Subgraph,
    g2: &Subgraph,
    costs: &EditCostConfig,
    node_limit: usize,
) -> Result<GedResult> {
    graph_edit_distance_with_budget(g1, g2, costs, node_limit, DEFAULT_SEARCH_BUDGET)
}

pub fn graph_edit_distance_with_budget(
    g1: &Subgraph,
    g2: &Subgraph,
    costs: &EditCostConfig,
    node_limit: usize,
    budget: usize,
) -> Result<GedResult> {
    costs.validate()?;
    if node_limit > MAX_NODE_LIMIT {
        return Err(Error::input(format!("GED node limit {node_limit} exceeds {MAX_NODE_LIMIT}")));
    }
    if g1.num_nodes() > node_limit || g2.num_nodes() > node_limit {
        return Ok(GedResult::Exceeded { limit: node_limit, by: ExceededBy::NodeLimit });
    }
    Ok(Search::new(g1, g2, costs).run(budget))
}

struct Search<'a> {
    costs: &'a EditCostConfig,
    adj1: Vec<u32>,
    adj2: Vec<u32>,
    tags1: Vec<usize>,
    tags2: Vec<usize>,
    order: Vec<usize>,
    n2: usize,
}

/// Partial mapping of `order[..mapping.len()]`; `NONE` marks deletion.
#[derive(Clone)]
struct State {
    mapping: Vec<u8>,
    used: u32,
    g: f64,
    f: f64,
    seq: usize,
}

const NONE: u8 = u8::MAX;

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    /// Max-heap order: lowest `f`, then deepest, then earliest generated.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.mapping.len().cmp(&other.mapping.len()))
            .then(other.seq.cmp(&self.seq))
    }
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        (m != 0).then(|| {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            b
        })
    })
}

fn tags_of(s: &Subgraph) -> Vec<usize> {
    s.node_tags.clone().unwrap_or_else(|| vec![0; s.num_nodes()])
}

impl<'a> Search<'a> {
    fn new(g1: &Subgraph, g2: &Subgraph, costs: &'a EditCostConfig) -> Self {
        let adj1 = g1.adjacency_masks();
        let order = search_order(&adj1, &g1.degrees());
        Search {
            costs,
            adj1,
            adj2: g2.adjacency_masks(),
            tags1: tags_of(g1),
            tags2: tags_of(g2),
            order,
            n2: g2.num_nodes(),
        }
    }

    fn run(&self, budget: usize) -> GedResult {
        let root = State { mapping: Vec::new(), used: 0, g: 0.0, f: 0.0, seq: 0 };
        let (h, completion) = self.bound(&root);
        let mut upper = self.complete_cost(&root, &completion);
        let mut best_mapping = self.merge(&root, &completion);
        let mut heap = BinaryHeap::new();
        heap.push(State { f: h, ..root });
        let mut generated = 1usize;
        while let Some(state) = heap.pop() {
            if state.f > upper + EPSILON {
                break;
            }
            let depth = state.mapping.len();
            if depth == self.order.len() {
                return GedResult::Distance { distance: state.f, mapping: self.full_mapping(&state.mapping) };
            }
            let u = self.order[depth];
            let choices = (0..self.n2).filter(|&v| state.used >> v & 1 == 0).map(|v| v as u8).chain([NONE]);
            for v in choices {
                generated += 1;
                if generated > budget {
                    return GedResult::Exceeded { limit: budget, by: ExceededBy::SearchBudget };
                }
                let mut mapping = state.mapping.clone();
                mapping.push(v);
                let used = if v == NONE { state.used } else { state.used | 1 << v };
                let g = state.g + self.step_cost(&state.mapping, u, v);
                let mut child = State { mapping, used, g, f: 0.0, seq: generated };
                let (h, completion) = self.bound(&child);
                child.f = g + h;
                let candidate = self.complete_cost(&child, &completion);
                if candidate < upper - EPSILON {
                    upper = candidate;
                    best_mapping = self.merge(&child, &completion);
                }
                if child.f <= upper + EPSILON {
                    heap.push(child);
                }
            }
        }
        // The incumbent meets the lower bound of every open state.
        GedResult::Distance { distance: upper, mapping: self.full_mapping(&best_mapping) }
    }

    /// Cost of mapping `u -> v` given the already-mapped prefix.
    fn step_cost(&self, prefix: &[u8], u: usize, v: u8) -> f64 {
        let c = self.costs;
        let mut cost = if v == NONE {
            c.node_delete
        } else {
            c.substitute(self.tags1[u], self.tags2[v as usize])
        };
        for (i, &x) in prefix.iter().enumerate() {
            let w = self.order[i];
            let e1 = self.adj1[u] >> w & 1 == 1;
            let e2 = v != NONE && x != NONE && self.adj2[v as usize] >> x & 1 == 1;
            if e1 && !e2 {
                cost += c.edge_delete;
            } else if e2 && !e1 {
                cost += c.edge_insert;
            }
        }
        cost
    }

    /// Assignment lower bound for the unmapped remainder, plus the assignment itself
    /// (rows: remaining first-graph nodes in order; value: image or `NONE`).
    fn bound(&self, state: &State) -> (f64, Vec<u8>) {
        let c = self.costs;
        let depth = state.mapping.len();
        let rest1: Vec<usize> = self.order[depth..].to_vec();
        let rest2: Vec<usize> = (0..self.n2).filter(|&v| state.used >> v & 1 == 0).collect();
        let (r1, r2) = (rest1.len(), rest2.len());
        if r1 + r2 == 0 {
            return (0.0, Vec::new());
        }
        let rest1_mask = rest1.iter().fold(0u32, |m, &u| m | 1 << u);
        let rest2_mask = rest2.iter().fold(0u32, |m, &v| m | 1 << v);
        let mut deleted1 = 0u32;
        let mut image = vec![usize::MAX; self.adj1.len()];
        let mut image_mask = 0u32;
        for (i, &x) in state.mapping.iter().enumerate() {
            let w = self.order[i];
            if x == NONE {
                deleted1 |= 1 << w;
            } else {
                image[w] = x as usize;
                image_mask |= 1 << x;
            }
        }
        let big = 1e9;
        let size = r1 + r2;
        let mut cost = vec![vec![0.0; size]; size];
        for (i, &u) in rest1.iter().enumerate() {
            let inner1 = (self.adj1[u] & rest1_mask).count_ones() as f64;
            let translated = bits(self.adj1[u] & !rest1_mask & !deleted1).fold(0u32, |m, w| m | 1 << image[w]);
            let to_deleted = (self.adj1[u] & deleted1).count_ones() as f64;
            for (j, &v) in rest2.iter().enumerate() {
                let inner2 = (self.adj2[v] & rest2_mask).count_ones() as f64;
                let cross2 = self.adj2[v] & image_mask;
                let deletes = (translated & !cross2).count_ones() as f64 + to_deleted;
                let inserts = (cross2 & !translated).count_ones() as f64;
                cost[i][j] = c.substitute(self.tags1[u], self.tags2[v])
                    + deletes * c.edge_delete
                    + inserts * c.edge_insert
                    + (inner1 - inner2).max(0.0) * c.edge_delete / 2.0
                    + (inner2 - inner1).max(0.0) * c.edge_insert / 2.0;
            }
            let all_cross = (self.adj1[u] & !rest1_mask).count_ones() as f64;
            for j in 0..r1 {
                cost[i][r2 + j] = if i == j {
                    c.node_delete + all_cross * c.edge_delete + inner1 * c.edge_delete / 2.0
                } else {
                    big
                };
            }
        }
        for (j, &v) in rest2.iter().enumerate() {
            let inner2 = (self.adj2[v] & rest2_mask).count_ones() as f64;
            let cross2 = (self.adj2[v] & image_mask).count_ones() as f64;
            for i in 0..r2 {
                cost[r1 + i][j] = if i == j {
                    c.node_insert + cross2 * c.edge_insert + inner2 * c.edge_insert / 2.0
                } else {
                    big
                };
            }
        }
        let rows = hungarian(&cost);
        let total: f64 = rows.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        let completion = rows[..r1].iter().map(|&j| if j < r2 { rest2[j] as u8 } else { NONE }).collect();
        (total, completion)
    }

    fn merge(&self, state: &State, completion: &[u8]) -> Vec<u8> {
        let mut m = state.mapping.clone();
        m.extend_from_slice(completion);
        m
    }

    /// Exact cost of the complete edit path given by a full mapping in search order.
    fn complete_cost(&self, state: &State, completion: &[u8]) -> f64 {
        let full = self.merge(state, completion);
        let mut total = 0.0;
        let mut used = 0u32;
        for (depth, &v) in full.iter().enumerate() {
            total += self.step_cost(&full[..depth], self.order[depth], v);
            if v != NONE {
                used |= 1 << v;
            }
        }
        total + self.insertion_cost(used)
    }

    /// Inserting every second-graph node outside `used`, and every edge touching one.
    fn insertion_cost(&self, used: u32) -> f64 {
        let all = if self.n2 == 32 { u32::MAX } else { (1u32 << self.n2) - 1 };
        let inserted = all & !used;
        let mut edges = 0u32;
        for v in 0..self.n2 {
            for w in bits(self.adj2[v]).filter(|&w| w > v) {
                if (inserted >> v | inserted >> w) & 1 == 1 {
                    edges += 1;
                }
            }
        }
        inserted.count_ones() as f64 * self.costs.node_insert + edges as f64 * self.costs.edge_insert
    }

    fn full_mapping(&self, mapping: &[u8]) -> Vec<Option<usize>> {
        let mut out = vec![None; self.adj1.len()];
        for (i, &v) in mapping.iter().enumerate() {
            out[self.order[i]] = (v != NONE).then_some(v as usize);
        }
        out
    }
}

/// Minimum-cost perfect assignment on a square matrix; returns the column per row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < min_v[j] {
                        min_v[j] = cur;
                        way[j] = j0;
                    }
                    if min_v[j] < delta {
                        delta = min_v[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=n {
        rows[owner[j] - 1] = j - 1;
    }
    rows
}

/// Exhaustive GED over every injective partial mapping; exact by construction.
pub fn ged_bruteforce_oracle(g1: &Subgraph, g2: &Subgraph, costs: &EditCostConfig) -> Result<f64> {
    costs.validate()?;
    for g in [g1, g2] {
        if g.num_nodes() > ORACLE_NODE_LIMIT {
            return Err(Error::Capacity { what: "oracle subgraph", size: g.num_nodes(), limit: ORACLE_NODE_LIMIT });
        }
    }
    let (n1, n2) = (g1.num_nodes(), g2.num_nodes());
    let edge = |s: &Subgraph, a: usize, b: usize| s.edges.contains(&(a.min(b), a.max(b)));
    let (t1, t2) = (tags_of(g1), tags_of(g2));
    let cost_of = |map: &[Option<usize>]| -> f64 {
        let mut total = 0.0;
        for (u, m) in map.iter().enumerate() {
            total += match m {
                Some(v) => costs.substitute(t1[u], t2[*v]),
                None => costs.node_delete,
            };
        }
        let inserted: Vec<usize> = (0..n2).filter(|v| !map.contains(&Some(*v))).collect();
        total += inserted.len() as f64 * costs.node_insert;
        for &(a, b) in &g1.edges {
            match (map[a], map[b]) {
                (Some(x), Some(y)) if edge(g2, x, y) => {}
                _ => total += costs.edge_delete,
            }
        }
        for &(x, y) in &g2.edges {
            let pre = |z: usize| map.iter().position(|&m| m == Some(z));
            match (pre(x), pre(y)) {
                (Some(a), Some(b)) if edge(g1, a, b) => {}
                _ => total += costs.edge_insert,
            }
        }
        total
    };
    fn enumerate(
        u: usize,
        n1: usize,
        n2: usize,
        map: &mut Vec<Option<usize>>,
        best: &mut f64,
        cost_of: &dyn Fn(&[Option<usize>]) -> f64,
    ) {
        if u == n1 {
            *best = best.min(cost_of(map));
            return;
        }
        for v in (0..n2).map(Some).chain([None]) {
            if v.is_some() && map.contains(&v) {
                continue;
            }
            map.push(v);
            enumerate(u + 1, n1, n2, map, best, cost_of);
            map.pop();
        }
    }
    let mut best = f64::INFINITY;
    enumerate(0, n1, n2, &mut Vec::with_capacity(n1), &mut best, &cost_of);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(n: usize, edges: &[(usize, usize)]) -> Subgraph {
        Subgraph::from_edges(n, edges.iter().copied(), [0]).unwrap()
    }

    fn house() -> Vec<(usize, usize)> {
        vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)]
    }

    fn ged(a: &Subgraph, b: &Subgraph) -> f64 {
        graph_edit_distance(a, b, &EditCostConfig::default(), DEFAULT_NODE_LIMIT).unwrap().distance().unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let h = sub(5, &house());
        assert_eq!(ged(&h, &h), 0.0);
    }

    #[test]
    fn house_plus_edge_is_one() {
        let mut extra = house();
        extra.push((2, 4));
        assert_eq!(ged(&sub(5, &house()), &sub(5, &extra)), 1.0);
    }

    #[test]
    fn triangle_vs_path_is_one() {
        let tri = sub(3, &[(0, 1), (1, 2), (0, 2)]);
        let path = sub(3, &[(0, 1), (1, 2)]);
        assert_eq!(ged(&tri, &path), 1.0);
        assert_eq!(ged_bruteforce_oracle(&tri, &path, &EditCostConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn empty_to_triangle_inserts_everything() {
        let empty = Subgraph::from_edges(0, [], []).unwrap();
        let tri = sub(3, &[(0, 1), (1, 2), (0, 2)]);
        let costs = EditCostConfig { node_insert: 2.0, edge_insert: 0.5, ..Default::default() };
        let expected = 3.0 * 2.0 + 3.0 * 0.5;
        assert_eq!(ged_bruteforce_oracle(&empty, &tri, &costs).unwrap(), expected);
        let r = graph_edit_distance(&empty, &tri, &costs, 15).unwrap();
        assert_eq!(r.distance(), Some(expected));
    }

    #[test]
    fn mapping_reports_images() {
        let a = sub(2, &[(0, 1)]);
        let b = sub(3, &[(0, 1), (1, 2)]);
        match graph_edit_distance(&a, &b, &EditCostConfig::default(), 15).unwrap() {
            GedResult::Distance { distance, mapping } => {
                assert_eq!(distance, 2.0);
                assert!(mapping.iter().all(Option::is_some));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tags_charge_substitution_only_when_respected() {
        let a = sub(2, &[(0, 1)]).with_tags(vec![0, 1]).unwrap();
        let b = sub(2, &[(0, 1)]).with_tags(vec![2, 1]).unwrap();
        assert_eq!(ged(&a, &b), 0.0);
        let tagged = EditCostConfig::default().with_tags();
        assert_eq!(graph_edit_distance(&a, &b, &tagged, 15).unwrap().distance(), Some(1.0));
        assert_eq!(ged_bruteforce_oracle(&a, &b, &tagged).unwrap(), 1.0);
    }

    #[test]
    fn limits_are_reported_distinctly() {
        let big = sub(16, &[]);
        let small = sub(1, &[]);
        assert_eq!(
            graph_edit_distance(&big, &small, &EditCostConfig::default(), 15).unwrap(),
            GedResult::Exceeded { limit: 15, by: ExceededBy::NodeLimit }
        );
        let a = sub(6, &[(0, 1), (2, 3), (4, 5)]);
        let b = sub(6, &[(0, 2), (1, 3), (3, 5), (0, 5)]);
        let r = graph_edit_distance_with_budget(&a, &b, &EditCostConfig::default(), 15, 3).unwrap();
        assert_eq!(r, GedResult::Exceeded { limit: 3, by: ExceededBy::SearchBudget });
        assert!(graph_edit_distance(&a, &b, &EditCostConfig::default(), 33).is_err());
        assert!(ged_bruteforce_oracle(&a, &b, &EditCostConfig::default()).is_err());
    }

    #[test]
    fn anchors_are_ignored() {
        let a = Subgraph::from_edges(3, [(0, 1), (1, 2)], [0]).unwrap();
        let b = Subgraph::from_edges(3, [(0, 1), (1, 2)], [1]).unwrap();
        assert_eq!(ged(&a, &b), 0.0);
    }

    #[test]
    fn hungarian_finds_optimum() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let rows = hungarian(&cost);
        let total: f64 = rows.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn fifteen_node_neighbourhoods_finish() {
        // Two different 15-node trees: the search must terminate well within budget.
        let a: Vec<(usize, usize)> = (1..15).map(|v| ((v - 1) / 2, v)).collect();
        let b: Vec<(usize, usize)> = (1..15).map(|v| (v - 1, v)).collect();
        let r = graph_edit_distance(&sub(15, &a), &sub(15, &b), &EditCostConfig::default(), 15).unwrap();
        assert!(r.distance().is_some(), "{r:?}");
    }
}
