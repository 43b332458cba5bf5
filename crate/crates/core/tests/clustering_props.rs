use gcx_core::clustering::{
    ahc_ward, dbscan, kmeans, kmeans_restarts, kmeans_with_history, pca, silhouette, NOISE,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(seed: u64, n: usize, d: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A few loose groups so clusterings are non-trivial.
    let centres: Vec<Vec<f64>> = (0..4).map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    Array2::from_shape_fn((n, d), |(i, j)| centres[i % 4][j] + rng.random_range(-3.0..3.0))
}

fn dist2(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    (&a - &b).mapv(|x| x * x).sum()
}

/// Naive DBSCAN: connected components of core points under the eps-graph, then
/// each border point joins the adjacent component whose smallest core index is lowest.
fn naive_dbscan(p: &Array2<f64>, eps: f64, min_pts: usize) -> Vec<usize> {
    let n = p.nrows();
    let close = |i: usize, j: usize| dist2(p.row(i), p.row(j)) <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| close(i, j)).count() >= min_pts).collect();
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(c: &mut Vec<usize>, x: usize) -> usize {
        if c[x] != x {
            let r = root(c, c[x]);
            c[x] = r;
        }
        c[x]
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && close(i, j) {
                let (a, b) = (root(&mut comp, i), root(&mut comp, j));
                comp[a.max(b)] = a.min(b);
            }
        }
    }
    let mut raw = vec![NOISE; n];
    for i in 0..n {
        if core[i] {
            raw[i] = root(&mut comp, i);
        }
    }
    for i in 0..n {
        if !core[i] {
            raw[i] = (0..n).filter(|&j| core[j] && close(i, j)).map(|j| raw[j]).min().unwrap_or(NOISE);
        }
    }
    // Name clusters by the order their first member appears.
    let mut names = std::collections::HashMap::new();
    raw.iter()
        .map(|&r| {
            if r == NOISE {
                NOISE
            } else {
                let next = names.len();
                *names.entry(r).or_insert(next)
            }
        })
        .collect()
}

#[test]
fn kmeans_fixpoint_and_monotone_inertia_on_fifty_sets() {
    for seed in 0..50u64 {
        let p = random_points(seed, 40, 3);
        let k = 2 + (seed as usize % 5);
        let (c, history) = kmeans_with_history(p.view(), k, seed).unwrap();
        let centroids = c.centroids.as_ref().unwrap();
        for (i, &a) in c.assignments.iter().enumerate() {
            let own = dist2(p.row(i), centroids.row(a));
            for j in 0..k {
                let other = dist2(p.row(i), centroids.row(j));
                assert!(own <= other + 1e-12, "seed {seed}: point {i} closer to {j} than {a}");
                if j < a {
                    assert!(other > own, "seed {seed}: tie must go to the lower id");
                }
            }
        }
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: inertia rose {} -> {}", w[0], w[1]);
        }
        let inertia: f64 = (0..p.nrows()).map(|i| dist2(p.row(i), centroids.row(c.assignments[i]))).sum();
        assert!((inertia - c.inertia.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn more_clusters_never_raise_best_of_ten_inertia() {
    for seed in 0..10u64 {
        let p = random_points(seed, 30, 2);
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let inertia = kmeans_restarts(p.view(), k, seed, 10).unwrap().inertia.unwrap();
            assert!(inertia <= last + 1e-9, "seed {seed}, k {k}: {inertia} > {last}");
            last = inertia;
        }
    }
}

#[test]
fn dbscan_matches_naive_oracle_on_fifty_points() {
    let p = random_points(123, 50, 2);
    for (eps, min_pts) in [(1.0, 3), (1.5, 4), (2.5, 5), (0.5, 2), (4.0, 10)] {
        let fast = dbscan(p.view(), eps, min_pts).unwrap();
        assert_eq!(fast.assignments, naive_dbscan(&p, eps, min_pts), "eps {eps}, min_pts {min_pts}");
    }
}

#[test]
fn full_rank_pca_preserves_distances() {
    let p = random_points(5, 30, 4);
    let z = pca(p.view(), 4).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            let (a, b) = (dist2(p.row(i), p.row(j)).sqrt(), dist2(z.row(i), z.row(j)).sqrt());
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dbscan_matches_oracle(seed in 0u64..10_000, eps in 0.3f64..5.0, min_pts in 1usize..8) {
        let p = random_points(seed, 25, 2);
        prop_assert_eq!(dbscan(p.view(), eps, min_pts).unwrap().assignments, naive_dbscan(&p, eps, min_pts));
    }

    #[test]
    fn dbscan_core_and_noise_ignore_point_order(seed in 0u64..10_000, eps in 0.5f64..4.0, min_pts in 2usize..6) {
        let p = random_points(seed, 25, 2);
        let mut perm: Vec<usize> = (0..25).collect();
        perm.reverse();
        let q = Array2::from_shape_fn((25, 2), |(i, j)| p[[perm[i], j]]);
        let a = dbscan(p.view(), eps, min_pts).unwrap();
        let b = dbscan(q.view(), eps, min_pts).unwrap();
        prop_assert_eq!(a.num_clusters, b.num_clusters);
        for i in 0..25 {
            prop_assert_eq!(a.assignments[perm[i]] == NOISE, b.assignments[i] == NOISE);
        }
    }

    #[test]
    fn pca_ignores_translation(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let p = random_points(seed, 20, 3);
        let moved = &p + shift;
        let a = pca(p.view(), 2).unwrap();
        let b = pca(moved.view(), 2).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn silhouette_is_bounded(seed in 0u64..10_000, k in 2usize..6) {
        let p = random_points(seed, 24, 2);
        let c = kmeans(p.view(), k, seed).unwrap();
        let s = silhouette(p.view(), &c).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn ward_merges_non_decreasing(seed in 0u64..10_000, n in 2usize..30) {
        let p = random_points(seed, n, 3);
        let (c, d) = ahc_ward(p.view(), 1.max(n / 3)).unwrap();
        prop_assert_eq!(d.merges.len(), n - 1);
        for w in d.merges.windows(2) {
            prop_assert!(w[0].distance <= w[1].distance);
        }
        prop_assert_eq!(c.num_clusters, 1.max(n / 3));
        prop_assert!(c.assignments.iter().all(|&a| a < c.num_clusters));
    }
}
