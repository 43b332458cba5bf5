use ndarray::{Array2, ArrayView2};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng as _;

use super::{check_points, cluster_means, squared_distance, Algorithm, Clustering};
use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

pub const MAX_ITERATIONS: usize = 300;

/// Single-start k-means: k-means++ seeding, then Lloyd iterations until the
/// assignment stops changing or [`MAX_ITERATIONS`] is reached.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<Clustering> {
    kmeans_restarts(points, k, seed, 1)
}

/// Best of `restarts` seedings by final inertia (first wins ties).
pub fn kmeans_restarts(points: ArrayView2<f64>, k: usize, seed: u64, restarts: usize) -> Result<Clustering> {
    validate(points, k)?;
    if restarts == 0 {
        return Err(Error::input("k-means needs at least one restart"));
    }
    let mut rng = rng::seeded(seed, streams::KMEANS);
    let mut best: Option<(Vec<usize>, Array2<f64>, f64)> = None;
    for _ in 0..restarts {
        let (assignments, centroids, history) = lloyd(points, k, &mut rng);
        let inertia = *history.last().unwrap();
        if best.as_ref().is_none_or(|b| inertia < b.2) {
            best = Some((assignments, centroids, inertia));
        }
    }
    let (assignments, centroids, inertia) = best.unwrap();
    Ok(Clustering {
        assignments,
        num_clusters: k,
        centroids: Some(centroids),
        algorithm: Algorithm::Kmeans { k, seed, restarts },
        inertia: Some(inertia),
    })
}

/// Single-start k-means plus the inertia after every assignment step.
pub fn kmeans_with_history(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<(Clustering, Vec<f64>)> {
    validate(points, k)?;
    let mut rng = rng::seeded(seed, streams::KMEANS);
    let (assignments, centroids, history) = lloyd(points, k, &mut rng);
    let clustering = Clustering {
        assignments,
        num_clusters: k,
        centroids: Some(centroids),
        algorithm: Algorithm::Kmeans { k, seed, restarts: 1 },
        inertia: history.last().copied(),
    };
    Ok((clustering, history))
}

fn validate(points: ArrayView2<f64>, k: usize) -> Result<()> {
    check_points(points)?;
    if k == 0 || k > points.nrows() {
        return Err(Error::input(format!("k-means needs 1 <= k <= {} points, got k = {k}", points.nrows())));
    }
    Ok(())
}

fn plus_plus_init(points: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(pick)));
        }
    }
    centroids
}

/// Nearest centroid per point (lowest id on ties) and the total squared distance.
fn assign(points: ArrayView2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .rows()
        .into_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.rows().into_iter().enumerate() {
                let d = squared_distance(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

fn lloyd(points: ArrayView2<f64>, k: usize, rng: &mut Rng) -> (Vec<usize>, Array2<f64>, Vec<f64>) {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut previous: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let (assignments, dists) = assign(points, &centroids);
        history.push(dists.iter().sum());
        if previous.as_ref() == Some(&assignments) {
            return (assignments, centroids, history);
        }
        centroids = cluster_means(points, &assignments, k);
        reseed_empty(points, &assignments, &mut centroids, k);
        previous = Some(assignments);
    }
    let (assignments, dists) = assign(points, &centroids);
    history.push(dists.iter().sum());
    (assignments, centroids, history)
}

/// Moves each empty cluster's centroid onto the point farthest from its own centroid.
fn reseed_empty(points: ArrayView2<f64>, assignments: &[usize], centroids: &mut Array2<f64>, k: usize) {
    let mut counts = vec![0usize; k];
    for &c in assignments {
        counts[c] += 1;
    }
    let mut taken = vec![false; points.nrows()];
    for empty in (0..k).filter(|&c| counts[c] == 0) {
        let mut far = (None, -1.0);
        for (i, &c) in assignments.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = squared_distance(points.row(i), centroids.row(c));
            if d > far.1 {
                far = (Some(i), d);
            }
        }
        if let Some(i) = far.0 {
            taken[i] = true;
            centroids.row_mut(empty).assign(&points.row(i));
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::{array, concatenate, Axis};
    use rand_distr::StandardNormal;

    use super::*;

    fn blobs(seed: u64) -> Array2<f64> {
        let mut rng = rng::seeded(seed, 99);
        let a = Array2::from_shape_fn((20, 2), |_| rng.sample::<f64, _>(StandardNormal) * 0.1);
        let b = Array2::from_shape_fn((20, 2), |_| 50.0 + rng.sample::<f64, _>(StandardNormal) * 0.1);
        concatenate(Axis(0), &[a.view(), b.view()]).unwrap()
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let p = array![[0.0, 0.0], [2.0, 0.0], [4.0, 6.0]];
        let c = kmeans(p.view(), 1, 3).unwrap();
        assert_eq!(c.assignments, vec![0, 0, 0]);
        let centroid = c.centroids.unwrap();
        assert!((centroid[[0, 0]] - 2.0).abs() < 1e-12 && (centroid[[0, 1]] - 2.0).abs() < 1e-12);
        // (4 + 4) + (0 + 4) + (4 + 16)
        assert!((c.inertia.unwrap() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs_recover_membership() {
        for seed in 0..5 {
            let c = kmeans(blobs(seed).view(), 2, seed).unwrap();
            let first = c.assignments[0];
            assert!(c.assignments[..20].iter().all(|&a| a == first));
            assert!(c.assignments[20..].iter().all(|&a| a != first));
        }
    }

    #[test]
    fn rejects_bad_k() {
        let p = array![[0.0], [1.0]];
        assert!(kmeans(p.view(), 0, 0).is_err());
        assert!(kmeans(p.view(), 3, 0).is_err());
    }

    #[test]
    fn duplicate_points_keep_k_clusters() {
        let p = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]];
        let c = kmeans(p.view(), 3, 0).unwrap();
        assert_eq!(c.centroids.unwrap().nrows(), 3);
        assert!(c.inertia.unwrap() < 1e-12);
    }

    #[test]
    fn restarts_never_worse_than_first_start() {
        let p = blobs(7);
        let one = kmeans(p.view(), 5, 1).unwrap();
        let many = kmeans_restarts(p.view(), 5, 1, 10).unwrap();
        assert!(many.inertia.unwrap() <= one.inertia.unwrap());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = blobs(2);
        assert_eq!(kmeans(p.view(), 4, 8).unwrap(), kmeans(p.view(), 4, 8).unwrap());
    }
}
