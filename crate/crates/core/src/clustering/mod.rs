//! Activation-space clustering and dimensionality reduction.

mod ahc;
mod dbscan;
mod kmeans;
mod pca;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ahc::{ahc_ward, Dendrogram, Merge, AHC_POINT_LIMIT};
pub use dbscan::{dbscan, suggest_eps};
pub use kmeans::{kmeans, kmeans_restarts, kmeans_with_history, MAX_ITERATIONS};
pub use pca::{pca, Pca};

/// Assignment id for points DBSCAN leaves unclustered.
pub const NOISE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Kmeans { k: usize, seed: u64, restarts: usize },
    AhcWard { num_clusters: usize },
    Dbscan { eps: f64, min_pts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id per point, dense in `0..num_clusters`, or [`NOISE`].
    #[serde(with = "noise_as_null")]
    pub assignments: Vec<usize>,
    pub num_clusters: usize,
    /// Cluster means (k-means, AHC); absent for DBSCAN.
    pub centroids: Option<Array2<f64>>,
    pub algorithm: Algorithm,
    pub inertia: Option<f64>,
}

impl Clustering {
    /// Point indices of each cluster, in index order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.assignments.iter().enumerate() {
            if c != NOISE {
                out[c].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.assignments.iter().filter(|&&c| c == NOISE).count()
    }
}

mod noise_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::NOISE;

    pub fn serialize<S: Serializer>(ids: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Option<usize>> = ids.iter().map(|&c| (c != NOISE).then_some(c)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let v: Vec<Option<usize>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|c| c.unwrap_or(NOISE)).collect())
    }
}

pub(crate) fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Means of each cluster's member rows; noise is skipped.
pub(crate) fn cluster_means(points: ArrayView2<f64>, assignments: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (row, &c) in points.rows().into_iter().zip(assignments) {
        if c != NOISE {
            sums.row_mut(c).scaled_add(1.0, &row);
            counts[c] += 1;
        }
    }
    for (mut row, &n) in sums.rows_mut().into_iter().zip(&counts) {
        if n > 0 {
            row /= n as f64;
        }
    }
    sums
}

/// Relabels clusters so ids increase with each cluster's smallest member index.
pub(crate) fn canonicalize(assignments: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in assignments.iter_mut() {
        if *c != NOISE {
            let next = map.len();
            *c = *map.entry(*c).or_insert(next);
        }
    }
    map.len()
}

/// Mean silhouette coefficient over non-noise points; singleton clusters score 0.
pub fn silhouette(points: ArrayView2<f64>, clustering: &Clustering) -> Result<f64> {
    if points.nrows() != clustering.assignments.len() {
        return Err(Error::input("silhouette: point count does not match assignments"));
    }
    let members = clustering.members();
    if members.iter().filter(|m| !m.is_empty()).count() < 2 {
        return Err(Error::input("silhouette needs at least two non-empty clusters"));
    }
    let labelled: Vec<usize> = (0..points.nrows()).filter(|&i| clustering.assignments[i] != NOISE).collect();
    let mut total = 0.0;
    for &i in &labelled {
        let own = clustering.assignments[i];
        if members[own].len() == 1 {
            continue;
        }
        let mut sums = vec![0.0; members.len()];
        for &j in &labelled {
            if j != i {
                sums[clustering.assignments[j]] += squared_distance(points.row(i), points.row(j)).sqrt();
            }
        }
        let a = sums[own] / (members[own].len() - 1) as f64;
        let b = (0..members.len())
            .filter(|&c| c != own && !members[c].is_empty())
            .map(|c| sums[c] / members[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / labelled.len() as f64)
}

pub(crate) fn check_points(points: ArrayView2<f64>) -> Result<()> {
    if points.nrows() == 0 {
        return Err(Error::input("clustering needs at least one point"));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("points contain non-finite values"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn labelled(assignments: Vec<usize>) -> Clustering {
        let num_clusters = assignments.iter().filter(|&&c| c != NOISE).max().map_or(0, |m| m + 1);
        Clustering {
            assignments,
            num_clusters,
            centroids: None,
            algorithm: Algorithm::AhcWard { num_clusters },
            inertia: None,
        }
    }

    #[test]
    fn silhouette_of_two_tight_pairs() {
        let p = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let good = silhouette(p.view(), &labelled(vec![0, 0, 1, 1])).unwrap();
        // a = 1, b = (10 + sqrt(101)) / 2 for every point.
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((good - (b - 1.0) / b).abs() < 1e-12);
        let split = silhouette(p.view(), &labelled(vec![0, 1, 0, 1])).unwrap();
        assert!(split < good);
        assert!(split < 0.0);
    }

    #[test]
    fn silhouette_needs_two_clusters() {
        let p = array![[0.0], [1.0]];
        assert!(silhouette(p.view(), &labelled(vec![0, 0])).is_err());
        assert!(silhouette(p.view(), &labelled(vec![0, NOISE])).is_err());
    }

    #[test]
    fn noise_serializes_as_null() {
        let c = labelled(vec![0, NOISE, 1]);
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["assignments"], serde_json::json!([0, null, 1]));
        let back: Clustering = serde_json::from_value(json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn canonical_ids_follow_first_member() {
        let mut a = vec![5, 5, NOISE, 2, 5, 9];
        assert_eq!(canonicalize(&mut a), 3);
        assert_eq!(a, vec![0, 0, NOISE, 1, 0, 2]);
    }
}
