use std::collections::VecDeque;

use ndarray::ArrayView2;

use super::{canonicalize, check_points, squared_distance, Algorithm, Clustering, NOISE};
use crate::error::{Error, Result};

/// Density clustering. A point's neighbourhood includes itself; a point is core
/// when that neighbourhood has at least `min_pts` members. Border points join the
/// first cluster (in index order of discovery) that reaches them.
pub fn dbscan(points: ArrayView2<f64>, eps: f64, min_pts: usize) -> Result<Clustering> {
    check_points(points)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::input(format!("DBSCAN eps must be positive and finite, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::input("DBSCAN min_pts must be at least 1"));
    }
    let n = points.nrows();
    let eps2 = eps * eps;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| squared_distance(points.row(i), points.row(j)) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut assignments = vec![NOISE; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || assignments[start] != NOISE {
            continue;
        }
        let id = next;
        next += 1;
        assignments[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if assignments[q] == NOISE {
                    assignments[q] = id;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    let num_clusters = canonicalize(&mut assignments);
    Ok(Clustering {
        assignments,
        num_clusters,
        centroids: None,
        algorithm: Algorithm::Dbscan { eps, min_pts },
        inertia: None,
    })
}

/// Median distance from each point to its 4th nearest other point.
pub fn suggest_eps(points: ArrayView2<f64>) -> Result<f64> {
    const K: usize = 4;
    check_points(points)?;
    let n = points.nrows();
    if n <= K {
        return Err(Error::input(format!("eps suggestion needs more than {K} points, got {n}")));
    }
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| squared_distance(points.row(i), points.row(j)))
                .collect();
            d.select_nth_unstable_by(K - 1, f64::total_cmp);
            d[K - 1].sqrt()
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    Ok(if n % 2 == 1 { kth[n / 2] } else { (kth[n / 2 - 1] + kth[n / 2]) / 2.0 })
}
