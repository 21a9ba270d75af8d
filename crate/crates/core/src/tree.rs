//! CART decision tree with Gini impurity.
//!
//! Thresholds are midpoints between consecutive distinct values, rows with
//! `value <= threshold` go left, ties between equally good splits go to the
//! lower feature index and then the lower threshold, and a leaf predicts the
//! most frequent class (lowest index on ties).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Splits with a smaller impurity decrease are not made.
    pub min_gain: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_gain: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::invalid("min_gain must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        histogram: Vec<usize>,
    },
}

/// Nodes are stored in pre-order; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub num_features: usize,
    pub num_classes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// `1 − Σ (n_c / n)²`.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::invalid("gini of an empty class histogram"));
    }
    Ok(gini_unchecked(counts, n))
}

fn gini_unchecked(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn histogram(labels: &[usize], rows: &[usize], num_classes: usize) -> Vec<usize> {
    let mut h = vec![0; num_classes];
    for &i in rows {
        h[labels[i]] += 1;
    }
    h
}

fn best_split_for_feature(
    x: &Matrix,
    labels: &[usize],
    rows: &[usize],
    feature: usize,
    parent: &[usize],
    parent_gini: f64,
) -> Option<Split> {
    let mut pairs: Vec<(f64, usize)> = rows.iter().map(|&i| (x.row(i)[feature], labels[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let mut left = vec![0usize; parent.len()];
    let mut right = parent.to_vec();
    let mut best: Option<Split> = None;
    for i in 0..n - 1 {
        let (v, l) = pairs[i];
        left[l] += 1;
        right[l] -= 1;
        let next = pairs[i + 1].0;
        if next <= v {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        let child = (nl as f64 * gini_unchecked(&left, nl) + nr as f64 * gini_unchecked(&right, nr)) / n as f64;
        let gain = parent_gini - child;
        if best.is_none_or(|b| gain > b.gain) {
            let mid = v + (next - v) / 2.0;
            // Adjacent floats can round the midpoint up onto `next`.
            let threshold = if mid < next { mid } else { v };
            best = Some(Split {
                feature,
                threshold,
                gain,
            });
        }
    }
    best
}

fn best_split_rows(x: &Matrix, labels: &[usize], rows: &[usize], num_classes: usize, min_gain: f64) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let parent = histogram(labels, rows, num_classes);
    let parent_gini = gini_unchecked(&parent, rows.len());
    let per_feature: Vec<Option<Split>> = (0..x.cols())
        .into_par_iter()
        .map(|f| best_split_for_feature(x, labels, rows, f, &parent, parent_gini))
        .collect();
    let mut best: Option<Split> = None;
    for s in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| s.gain > b.gain) {
            best = Some(s);
        }
    }
    best.filter(|s| s.gain >= min_gain)
}

/// Exhaustive search for the split with the largest Gini decrease. Returns
/// `None` when no threshold exists (all features constant) or the best
/// decrease is below `params.min_gain`. A zero-gain split is accepted under
/// the default `min_gain = 0`, which is what lets a tree separate XOR-like
/// data where no single split helps on its own.
pub fn best_split(x: &Matrix, labels: &[usize], params: &TreeParams) -> Result<Option<Split>> {
    check_inputs(x, labels)?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let rows: Vec<usize> = (0..labels.len()).collect();
    if rows.len() < params.min_samples_split
        || histogram(labels, &rows, num_classes).iter().filter(|&&c| c > 0).count() < 2
    {
        return Ok(None);
    }
    Ok(best_split_rows(x, labels, &rows, num_classes, params.min_gain))
}

fn check_inputs(x: &Matrix, labels: &[usize]) -> Result<()> {
    if x.rows() != labels.len() {
        return Err(Error::Shape {
            op: "decision tree",
            left: x.shape(),
            right: (labels.len(), 1),
        });
    }
    Ok(())
}

fn argmax_lowest(h: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in h.iter().enumerate() {
        if v > h[best] {
            best = c;
        }
    }
    best
}

/// Grows a tree on `x` / `labels` (labels must be `< num_classes`).
pub fn fit(x: &Matrix, labels: &[usize], num_classes: usize, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    check_inputs(x, labels)?;
    if labels.is_empty() {
        return Err(Error::Empty("decision tree training set"));
    }
    crate::nn::layers::check_labels(labels, num_classes)?;

    struct Task {
        rows: Vec<usize>,
        depth: usize,
        /// Parent slot and whether this is its left child.
        parent: Option<(usize, bool)>,
    }
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack = vec![Task {
        rows: (0..labels.len()).collect(),
        depth: 0,
        parent: None,
    }];
    // Depth-first, left child first, so nodes are appended in pre-order.
    while let Some(Task { rows, depth, parent }) = stack.pop() {
        let slot = nodes.len();
        if let Some((p, is_left)) = parent {
            if let TreeNode::Split { left, right, .. } = &mut nodes[p] {
                *(if is_left { left } else { right }) = slot;
            }
        }
        let hist = histogram(labels, &rows, num_classes);
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let can_split = !pure && rows.len() >= params.min_samples_split && params.max_depth.is_none_or(|m| depth < m);
        let split = if can_split {
            best_split_rows(x, labels, &rows, num_classes, params.min_gain)
        } else {
            None
        };
        match split {
            None => nodes.push(TreeNode::Leaf {
                class: argmax_lowest(&hist),
                histogram: hist,
            }),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.row(i)[s.feature] <= s.threshold);
                nodes.push(TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push(Task {
                    rows: r,
                    depth: depth + 1,
                    parent: Some((slot, false)),
                });
                stack.push(Task {
                    rows: l,
                    depth: depth + 1,
                    parent: Some((slot, true)),
                });
            }
        }
    }
    Ok(DecisionTree {
        nodes,
        num_features: x.cols(),
        num_classes,
    })
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.num_features {
            return Err(Error::Shape {
                op: "DecisionTree::predict",
                left: x.shape(),
                right: (x.rows(), self.num_features),
            });
        }
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => best = best.max(d),
                TreeNode::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
            }
        }
        best
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// One node per line in pre-order, indented by depth.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            let pad = "  ".repeat(d);
            match &self.nodes[i] {
                TreeNode::Leaf { class, histogram } => {
                    out.push_str(&format!("{pad}[{i}] leaf class={class} counts={histogram:?}\n"));
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push_str(&format!("{pad}[{i}] x{feature} <= {threshold:?}\n"));
                    stack.push((*right, d + 1));
                    stack.push((*left, d + 1));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[1, 1]).unwrap(), 0.5);
        assert_eq!(gini(&[3, 1]).unwrap(), 0.375);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn one_dimensional_split() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let s = best_split(&x, &[0, 0, 1, 1], &TreeParams::default()).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold, s.gain), (0, 2.5, 0.5));
        assert_eq!(best_split(&x, &[1, 1, 1, 1], &TreeParams::default()).unwrap(), None);
        let c = Matrix::filled(4, 2, 0.3);
        assert_eq!(best_split(&c, &[0, 1, 0, 1], &TreeParams::default()).unwrap(), None);
    }

    #[test]
    fn xor_corners() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let t = fit(&x, &y, 2, &TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.predict(&x).unwrap(), y);
    }

    #[test]
    fn boundary_goes_left_and_width_is_checked() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let t = fit(&x, &[0, 0, 1, 1], 2, &TreeParams::default()).unwrap();
        assert_eq!(t.predict_row(&[2.5]), 0);
        assert_eq!(t.predict_row(&[2.5000001]), 1);
        assert!(t.predict(&Matrix::zeros(1, 2)).is_err());
        assert_eq!(t.nodes.len(), 3);
        assert!(t.export_text().starts_with("[0] x0 <= 2.5\n"));
    }

    #[test]
    fn single_class_and_empty() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let t = fit(&x, &[2, 2], 3, &TreeParams::default()).unwrap();
        assert_eq!(
            t.nodes,
            vec![TreeNode::Leaf {
                class: 2,
                histogram: vec![0, 0, 2]
            }]
        );
        assert!(fit(&Matrix::zeros(0, 1), &[], 2, &TreeParams::default()).is_err());
    }

    #[test]
    fn max_depth_and_leaf_ties() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let p = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let t = fit(&x, &[1, 0, 1, 0], 2, &p).unwrap();
        assert_eq!(t.predict_row(&[0.0]), 0);
    }
}
