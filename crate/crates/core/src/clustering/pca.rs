use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::check_points;
use crate::error::{Error, Result};

/// A fitted principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `dims × features`, one unit-length axis per row, by descending variance.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
}

impl Pca {
    pub fn fit(points: ArrayView2<f64>, dims: usize) -> Result<Pca> {
        check_points(points)?;
        let (n, d) = points.dim();
        if dims == 0 || dims > d {
            return Err(Error::input(format!("PCA needs 1 <= dims <= {d}, got {dims}")));
        }
        let mean = points.mean_axis(Axis(0)).expect("non-empty");
        let centered = &points - &mean;
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let cov = centered.t().dot(&centered) / denom;
        let eigen = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
        let mut components = Array2::zeros((dims, d));
        let mut explained_variance = Array1::zeros(dims);
        for (row, &k) in order.iter().take(dims).enumerate() {
            let axis = eigen.eigenvectors.column(k);
            // Sign convention: the entry of largest magnitude is positive.
            let mut pivot = 0;
            for j in 1..d {
                if axis[j].abs() > axis[pivot].abs() {
                    pivot = j;
                }
            }
            let sign = if axis[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[[row, j]] = sign * axis[j];
            }
            explained_variance[row] = eigen.eigenvalues[k].max(0.0);
        }
        Ok(Pca { mean, components, explained_variance })
    }

    pub fn dims(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.mean.len() {
            return Err(Error::input(format!(
                "PCA expects {} features, got {}",
                self.mean.len(),
                points.ncols()
            )));
        }
        Ok((&points - &self.mean).dot(&self.components.t()))
    }
}

/// Mean-centred projection onto the top `dims` principal axes.
pub fn pca(points: ArrayView2<f64>, dims: usize) -> Result<Array2<f64>> {
    Pca::fit(points, dims)?.transform(points)
}
