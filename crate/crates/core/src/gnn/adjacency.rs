use ndarray::{Array2, ArrayView2};

use crate::graph::Graph;

/// Symmetric-normalized propagation matrix `D^-1/2 (A + I) D^-1/2`, dense.
pub fn normalize_adjacency(g: &Graph) -> Array2<f64> {
    let sparse = Propagation::from_graphs(std::slice::from_ref(g));
    let n = g.num_nodes();
    let mut dense = Array2::zeros((n, n));
    for i in 0..n {
        for (j, w) in sparse.row(i) {
            dense[[i, j]] = w;
        }
    }
    dense
}

/// Block-diagonal normalized adjacency over one or more graphs in CSR form.
#[derive(Debug, Clone)]
pub(crate) struct Propagation {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Propagation {
    pub(crate) fn from_graphs(graphs: &[Graph]) -> Self {
        let total: usize = graphs.iter().map(Graph::num_nodes).sum();
        let mut indptr = Vec::with_capacity(total + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut offset = 0;
        for g in graphs {
            let inv_sqrt: Vec<f64> = (0..g.num_nodes())
                .map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
                .collect();
            for v in 0..g.num_nodes() {
                // Self-loop merged into the sorted neighbour list.
                let mut row: Vec<usize> = g.neighbors(v).to_vec();
                let pos = row.partition_point(|&w| w < v);
                row.insert(pos, v);
                for w in row {
                    indices.push(offset + w);
                    values.push(inv_sqrt[v] * inv_sqrt[w]);
                }
                indptr.push(indices.len());
            }
            offset += g.num_nodes();
        }
        Propagation { indptr, indices, values }
    }

    pub(crate) fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub(crate) fn num_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    /// `self · x`; the matrix is symmetric so this also serves for the transpose.
    pub(crate) fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_rows(), x.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (j, w) in self.row(i) {
                out_row.scaled_add(w, &x.row(j));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn isolated_node_is_identity() {
        let a = normalize_adjacency(&Graph::new(1, []).unwrap());
        assert_eq!(a, Array2::from_elem((1, 1), 1.0));
    }

    #[test]
    fn single_edge_is_all_halves() {
        let a = normalize_adjacency(&Graph::new(2, [(0, 1)]).unwrap());
        for v in a.iter() {
            assert_close(*v, 0.5);
        }
    }

    #[test]
    fn symmetric_and_matches_sparse_apply() {
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]).unwrap();
        let a = normalize_adjacency(&g);
        assert_eq!(a, a.t());
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.1);
        let dense = a.dot(&x);
        let sparse = Propagation::from_graphs(&[g]).apply(x.view());
        for (d, s) in dense.iter().zip(sparse.iter()) {
            assert_close(*d, *s);
        }
    }

    #[test]
    fn block_diagonal_over_graphs() {
        let g1 = Graph::new(2, [(0, 1)]).unwrap();
        let g2 = Graph::new(1, []).unwrap();
        let p = Propagation::from_graphs(&[g1, g2]);
        assert_eq!(p.num_rows(), 3);
        assert_eq!(p.row(2).collect::<Vec<_>>(), vec![(2, 1.0)]);
    }
}
