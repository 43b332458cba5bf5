use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { class: usize, samples: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary CART classifier: Gini impurity, no depth limit, leaves of any size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub num_classes: usize,
}

impl DecisionTree {
    /// Splits are `x[feature] <= threshold` (left) at midpoints between distinct
    /// values. Gain ties go to the lower feature, then the lower threshold; leaf
    /// majority ties go to the lower class.
    pub fn fit(features: ArrayView2<f64>, labels: &[usize], num_classes: usize) -> Result<DecisionTree> {
        if features.nrows() == 0 {
            return Err(Error::input("decision tree needs at least one training example"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::input("one label per training row is required"));
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::input(format!("label {c} out of range for {num_classes} classes")));
        }
        let mut tree = DecisionTree { nodes: Vec::new(), num_classes };
        let rows: Vec<usize> = (0..labels.len()).collect();
        tree.grow(features, labels, rows);
        Ok(tree)
    }

    fn grow(&mut self, x: ArrayView2<f64>, y: &[usize], rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let counts = class_counts(y, &rows, self.num_classes);
        let majority = argmax(&counts);
        self.nodes.push(TreeNode::Leaf { class: majority, samples: rows.len() });
        if counts[majority] == rows.len() {
            return id;
        }
        let Some((feature, threshold)) = best_split(x, y, &rows, self.num_classes) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| x[[r, feature]] <= threshold);
        let left = self.grow(x, y, left_rows);
        let right = self.grow(x, y, right_rows);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { class, .. } => return class,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn class_counts(y: &[usize], rows: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &r in rows {
        counts[y[r]] += 1;
    }
    counts
}

fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn gini_mass(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    // Total-weighted impurity: t * (1 - sum p^2).
    t - counts.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / t
}

fn best_split(x: ArrayView2<f64>, y: &[usize], rows: &[usize], num_classes: usize) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    let total = class_counts(y, rows, num_classes);
    for feature in 0..x.ncols() {
        let mut sorted: Vec<usize> = rows.to_vec();
        sorted.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]));
        let mut left = vec![0usize; num_classes];
        for i in 0..sorted.len() - 1 {
            left[y[sorted[i]]] += 1;
            let (here, next) = (x[[sorted[i], feature]], x[[sorted[i + 1], feature]]);
            if here == next {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let impurity = gini_mass(&left, i + 1) + gini_mass(&right, sorted.len() - i - 1);
            if best.is_none_or(|b| impurity < b.0 - 1e-12) {
                best = Some((impurity, feature, here + (next - here) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
