//! Binary-classification random forest with Gini splits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReductionError;
use crate::numeric::{Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// `None` means `ceil(sqrt(C))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { trees: 100, max_depth: 8, min_leaf: 5, features_per_split: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// Fraction of positive training rows reaching this node.
    pub probability: f64,
    pub samples: usize,
    /// `gini(node) - n_l/n gini(left) - n_r/n gini(right)`; zero for leaves.
    pub impurity_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

/// Two-class Gini impurity, `sum_c p_c (1 - p_c) = 2 p (1 - p)`.
#[inline]
pub fn gini(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

impl DecisionTree {
    /// Wraps hand-built nodes; node 0 is the root.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, ReductionError> {
        if nodes.is_empty() {
            return Err(ReductionError::InvalidTree("tree has no nodes".into()));
        }
        for n in &nodes {
            if !(0.0..=1.0).contains(&n.probability) || n.impurity_decrease < 0.0 {
                return Err(ReductionError::InvalidTree("leaf probability or decrease out of range".into()));
            }
            if let NodeKind::Split { left, right, .. } = n.kind {
                if left >= nodes.len() || right >= nodes.len() {
                    return Err(ReductionError::InvalidTree("child index out of range".into()));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf => 0,
                NodeKind::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf probability for a row whose feature `j` reads as `feature(j)`.
    #[inline]
    pub fn predict_with(&self, feature: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.kind {
                NodeKind::Leaf => return node.probability,
                NodeKind::Split { feature: f, threshold, left, right } => {
                    i = if feature(f) <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_with(|j| row[j])
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    seeds: Vec<u64>,
    feature_count: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<DecisionTree>, feature_count: usize) -> Result<Self, ReductionError> {
        if trees.is_empty() {
            return Err(ReductionError::InvalidTree("forest needs at least one tree".into()));
        }
        if trees.iter().any(|t| t.max_feature().is_some_and(|f| f >= feature_count)) {
            return Err(ReductionError::InvalidTree("tree references a feature beyond the channel count".into()));
        }
        let seeds = vec![0; trees.len()];
        Ok(Self { trees, seeds, feature_count })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Per-tree stream seeds used for bootstrap and feature sampling.
    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn predict_with(&self, feature: impl Fn(usize) -> f64 + Copy) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_with(feature)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_with(|j| row[j])
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.predict(x.row(r))).collect()
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    cfg: &'a ForestConfig,
    mtry: usize,
}

struct Candidate {
    decrease: f64,
    feature: usize,
    threshold: f64,
    split_at: usize,
}

impl Builder<'_> {
    fn build(&self, rng: &mut RngStream) -> DecisionTree {
        let n = self.x.rows();
        let rows: Vec<usize> = if self.cfg.bootstrap { (0..n).map(|_| rng.index(n)).collect() } else { (0..n).collect() };

        let mut nodes: Vec<TreeNode> = Vec::new();
        // (rows, depth, slot in parent to patch)
        let mut stack = vec![(rows, 0usize, None::<(usize, bool)>)];
        let mut features: Vec<usize> = (0..self.x.cols()).collect();
        while let Some((mut rows, depth, parent)) = stack.pop() {
            let id = nodes.len();
            if let Some((p, is_left)) = parent {
                if let NodeKind::Split { left, right, .. } = &mut nodes[p].kind {
                    if is_left {
                        *left = id;
                    } else {
                        *right = id;
                    }
                }
            }
            let total = rows.len();
            let positives = rows.iter().filter(|&&r| self.y[r] != 0).count();
            let mut node = TreeNode {
                kind: NodeKind::Leaf,
                probability: positives as f64 / total as f64,
                samples: total,
                impurity_decrease: 0.0,
            };
            let impurity = gini(positives, total);
            let splittable = depth < self.cfg.max_depth && impurity > 0.0 && total >= 2 * self.cfg.min_leaf;
            let best = if splittable { self.best_split(&mut rows, positives, impurity, &mut features, rng) } else { None };
            if let Some(c) = best {
                node.kind = NodeKind::Split { feature: c.feature, threshold: c.threshold, left: 0, right: 0 };
                node.impurity_decrease = c.decrease;
                let f = c.feature;
                rows.sort_unstable_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
                let right_rows = rows.split_off(c.split_at);
                nodes.push(node);
                // Right pushed first so the left subtree is laid out next.
                stack.push((right_rows, depth + 1, Some((id, false))));
                stack.push((rows, depth + 1, Some((id, true))));
            } else {
                nodes.push(node);
            }
        }
        DecisionTree { nodes }
    }

    fn best_split(
        &self,
        rows: &mut [usize],
        positives: usize,
        impurity: f64,
        features: &mut [usize],
        rng: &mut RngStream,
    ) -> Option<Candidate> {
        let c = features.len();
        for i in 0..self.mtry {
            let j = i + rng.index(c - i);
            features.swap(i, j);
        }
        let mut chosen = features[..self.mtry].to_vec();
        chosen.sort_unstable();

        let total = rows.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        let mut best: Option<Candidate> = None;
        for f in chosen {
            rows.sort_unstable_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 1..total {
                left_pos += usize::from(self.y[rows[k - 1]] != 0);
                if k < min_leaf || total - k < min_leaf {
                    continue;
                }
                let lo = self.x.get(rows[k - 1], f);
                let hi = self.x.get(rows[k], f);
                if lo >= hi {
                    continue;
                }
                let nl = k as f64;
                let nr = (total - k) as f64;
                let drop = impurity
                    - nl / total as f64 * gini(left_pos, k)
                    - nr / total as f64 * gini(positives - left_pos, total - k);
                let drop = drop.max(0.0);
                if best.as_ref().is_none_or(|b| drop > b.decrease) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate { decrease: drop, feature: f, threshold, split_at: k });
                }
            }
        }
        best
    }
}

/// Trains `cfg.trees` Gini trees, tree `t` driven by sub-stream `t` of the
/// seed. Trees build in parallel; the result does not depend on thread count.
pub fn fit_random_forest(x: &Matrix, y: &[u8], cfg: &ForestConfig) -> Result<Forest, ReductionError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ReductionError::EmptyInput);
    }
    if y.len() != x.rows() {
        return Err(ReductionError::LabelCount { rows: x.rows(), labels: y.len() });
    }
    if x.rows() < 2 {
        return Err(ReductionError::TooFewSamples(x.rows()));
    }
    let positives = y.iter().filter(|&&v| v != 0).count();
    if positives == 0 || positives == y.len() {
        return Err(ReductionError::SingleClass);
    }
    if cfg.trees == 0 {
        return Err(ReductionError::InvalidConfig("trees must be >= 1".into()));
    }
    let c = x.cols();
    let mtry = cfg.features_per_split.unwrap_or_else(|| (c as f64).sqrt().ceil() as usize).clamp(1, c);
    let builder = Builder { x, y, cfg, mtry };
    let root = RngStream::new(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.trees).map(|t| root.substream(t as u64).seed()).collect();
    let trees = seeds.par_iter().map(|&s| builder.build(&mut RngStream::new(s))).collect();
    Ok(Forest { trees, seeds, feature_count: c })
}
