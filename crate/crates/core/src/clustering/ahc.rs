use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{canonicalize, check_points, cluster_means, squared_distance, Algorithm, Clustering};
use crate::error::{Error, Result};

/// Largest input accepted; the condensed distance matrix is quadratic in size.
pub const AHC_POINT_LIMIT: usize = 8192;

/// One agglomeration step. Leaves are `0..n`; the cluster formed by merge `i` gets id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub num_points: usize,
    /// Ordered by non-decreasing distance.
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Flat partition into `num_clusters` groups; ids follow the first member.
    pub fn cut(&self, num_clusters: usize) -> Result<Vec<usize>> {
        let n = self.num_points;
        if num_clusters == 0 || num_clusters > n {
            return Err(Error::input(format!("cannot cut {n} points into {num_clusters} clusters")));
        }
        let mut uf = UnionFind::new(2 * n);
        for (i, m) in self.merges.iter().take(n - num_clusters).enumerate() {
            uf.union(m.a, n + i);
            uf.union(m.b, n + i);
        }
        let mut labels: Vec<usize> = (0..n).map(|p| uf.find(p)).collect();
        canonicalize(&mut labels);
        Ok(labels)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Condensed upper-triangle index of pair `(i, j)`, `i != j`.
fn condensed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

/// Ward-linkage agglomerative clustering, cut at `num_clusters`.
///
/// Linkage distances follow the usual convention where merging singletons at
/// Euclidean distance `d` costs `d`.
pub fn ahc_ward(points: ArrayView2<f64>, num_clusters: usize) -> Result<(Clustering, Dendrogram)> {
    check_points(points)?;
    let n = points.nrows();
    if num_clusters == 0 || num_clusters > n {
        return Err(Error::input(format!("AHC needs 1 <= num_clusters <= {n}, got {num_clusters}")));
    }
    if n > AHC_POINT_LIMIT {
        return Err(Error::Capacity { what: "AHC points", size: n, limit: AHC_POINT_LIMIT });
    }
    let dendrogram = ward_dendrogram(points);
    let assignments = dendrogram.cut(num_clusters)?;
    let centroids = cluster_means(points, &assignments, num_clusters);
    Ok((
        Clustering {
            assignments,
            num_clusters,
            centroids: Some(centroids),
            algorithm: Algorithm::AhcWard { num_clusters },
            inertia: None,
        },
        dendrogram,
    ))
}

/// Nearest-neighbour chain with Lance–Williams updates.
fn ward_dendrogram(points: ArrayView2<f64>) -> Dendrogram {
    let n = points.nrows();
    let mut dist = vec![0.0; n * n.saturating_sub(1) / 2];
    for i in 0..n {
        for j in i + 1..n {
            dist[condensed(n, i, j)] = squared_distance(points.row(i), points.row(j)).sqrt();
        }
    }
    // Slot `i` stands for the cluster currently stored under representative `i`.
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        let (x, y, d) = loop {
            let x = *chain.last().unwrap();
            let previous = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            let mut best = previous;
            let mut best_d = previous.map_or(f64::INFINITY, |p| dist[condensed(n, x, p)]);
            for j in 0..n {
                if active[j] && j != x {
                    let d = dist[condensed(n, x, j)];
                    if d < best_d {
                        best = Some(j);
                        best_d = d;
                    }
                }
            }
            let y = best.unwrap();
            if Some(y) == previous {
                chain.pop();
                chain.pop();
                break (x, y, best_d);
            }
            chain.push(y);
        };
        let (keep, drop) = if x < y { (x, y) } else { (y, x) };
        raw.push((keep, drop, d));
        let (nx, ny) = (size[x] as f64, size[y] as f64);
        for k in 0..n {
            if !active[k] || k == x || k == y {
                continue;
            }
            let nk = size[k] as f64;
            let dxk = dist[condensed(n, x, k)];
            let dyk = dist[condensed(n, y, k)];
            let updated = (((nx + nk) * dxk * dxk + (ny + nk) * dyk * dyk - nk * d * d) / (nx + ny + nk)).max(0.0);
            dist[condensed(n, keep, k)] = updated.sqrt();
        }
        size[keep] += size[drop];
        active[drop] = false;
    }
    // Stable sort by distance, then relabel slots into dendrogram ids.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].2.total_cmp(&raw[b].2));
    let mut uf = UnionFind::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut cluster_size = vec![1usize; n];
    let merges = order
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let (p, q, distance) = raw[r];
            let (rp, rq) = (uf.find(p), uf.find(q));
            let (a, b) = (label[rp].min(label[rq]), label[rp].max(label[rq]));
            let size = cluster_size[rp] + cluster_size[rq];
            uf.union(rp, rq);
            let root = uf.find(rp);
            label[root] = n + i;
            cluster_size[root] = size;
            Merge { a, b, distance, size }
        })
        .collect();
    Dendrogram { num_points: n, merges }
}
