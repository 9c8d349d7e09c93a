//! Bootstrap random forests of Gini CART trees.

use super::{check_dim, ModelError};
use crate::rng;
use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        k.clamp(1, d.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::Fraction(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v <= 1.0 => Ok(MaxFeatures::Fraction(v)),
                _ => Err(format!("max_features must be sqrt, log2 or a fraction in (0, 1], got {other:?}")),
            },
        }
    }
}

impl TryFrom<String> for MaxFeatures {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MaxFeatures> for String {
    fn from(m: MaxFeatures) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_estimators: usize,
    /// `None` grows until purity or `min_samples_leaf` stops it.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl ForestHyper {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyper(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if let MaxFeatures::Fraction(f) = self.max_features {
            if !(f > 0.0 && f <= 1.0) {
                return bad("max_features fraction must be in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        /// `[P(y = 0), P(y = 1)]`
        proba: [f64; 2],
        cover: f64,
    },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }
}

/// A binary tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let TreeNode::Split { feature, threshold, left, right, .. } = self.nodes[i] {
            i = if x[feature] <= threshold { left } else { right };
        }
        i
    }

    /// Positive-class probability.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_for(x)] {
            TreeNode::Leaf { proba, .. } => proba[1],
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean of leaf values.
    pub fn expected_value(&self) -> f64 {
        let root = self.nodes[0].cover();
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { proba, cover } => Some(proba[1] * cover),
                TreeNode::Split { .. } => None,
            })
            .sum::<f64>()
            / root
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Structural checks: child links in range, every node reached once,
    /// positive covers that add up, normalised leaf probabilities.
    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |m: String| Err(ModelError::InvalidTree(m));
        if self.nodes.is_empty() {
            return invalid("tree has no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return invalid(format!("node {i} reached twice"));
            }
            seen[i] = true;
            let node = &self.nodes[i];
            if !(node.cover() > 0.0) {
                return invalid(format!("node {i} has non-positive cover {}", node.cover()));
            }
            match *node {
                TreeNode::Leaf { proba, .. } => {
                    if (proba[0] + proba[1] - 1.0).abs() > 1e-12 || proba.iter().any(|p| *p < 0.0) {
                        return invalid(format!("leaf {i} probabilities {proba:?}"));
                    }
                }
                TreeNode::Split { left, right, cover, .. } => {
                    if left >= self.nodes.len() || right >= self.nodes.len() {
                        return invalid(format!("node {i} has a child out of range"));
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if (sum - cover).abs() > 1e-9 * cover.max(1.0) {
                        return invalid(format!("node {i} cover {cover} != children {sum}"));
                    }
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return invalid(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub hyper: ForestHyper,
    pub n_features: usize,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    max_depth: Option<usize>,
    min_leaf: usize,
    n_candidates: usize,
    rng: rng::Prng,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, n: usize, pos: usize) -> usize {
        let p1 = pos as f64 / n as f64;
        self.nodes.push(TreeNode::Leaf {
            proba: [1.0 - p1, p1],
            cover: n as f64,
        });
        self.nodes.len() - 1
    }

    /// Best Gini split among a fresh random subset of features. Candidates
    /// are scanned in ascending feature order and ascending threshold, and
    /// only a strictly better score replaces the incumbent.
    fn best_split(&mut self, samples: &[usize], pos: usize) -> Option<BestSplit> {
        let n = samples.len();
        let d = self.x.ncols();
        let mut features = rand::seq::index::sample(&mut self.rng, d, self.n_candidates).into_vec();
        features.sort_unstable();

        // maximising Σ_children Σ_k n_ck² / n_c is minimising weighted Gini
        let neg = n - pos;
        let parent = ((pos * pos + neg * neg) as f64) / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in features {
            column.clear();
            column.extend(samples.iter().map(|&s| (self.x[[s, f]], self.y[s])));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for i in 0..n - 1 {
                left_pos += usize::from(column[i].1);
                let nl = i + 1;
                let nr = n - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let (lo, hi) = (column[i].0, column[i + 1].0);
                if lo == hi {
                    continue;
                }
                let (lp, ln) = (left_pos as f64, (nl - left_pos) as f64);
                let rp = (pos - left_pos) as f64;
                let rn = (nr - (pos - left_pos)) as f64;
                let score = (lp * lp + ln * ln) / nl as f64 + (rp * rp + rn * rn) / nr as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature: f, threshold, score });
                }
            }
        }
        best.filter(|b| b.score > parent * (1.0 + 1e-12))
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let n = samples.len();
        let pos = samples.iter().filter(|&&s| self.y[s] == 1).count();
        let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
        if pos == 0 || pos == n || depth_capped || n < 2 * self.min_leaf {
            return self.leaf(n, pos);
        }
        let Some(split) = self.best_split(samples, pos) else {
            return self.leaf(n, pos);
        };
        let x = self.x;
        let mut cut = 0;
        for i in 0..n {
            if x[[samples[i], split.feature]] <= split.threshold {
                samples.swap(i, cut);
                cut += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { proba: [0.0, 0.0], cover: 0.0 });
        let (l, r) = samples.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            cover: n as f64,
        };
        me
    }
}

/// Grow `h.n_estimators` trees, tree `t` on a bootstrap sample drawn from
/// the PRNG seeded with `(h.seed, t)`.
pub fn train_forest(x: ArrayView2<f64>, y: &[u8], h: &ForestHyper) -> Result<ForestModel, ModelError> {
    h.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if n != y.len() {
        return Err(ModelError::DimensionMismatch { expected: n, found: y.len() });
    }
    let n_candidates = h.max_features.count(x.ncols());
    let trees = (0..h.n_estimators)
        .map(|t| {
            let mut rng = rng::prng(&[h.seed, t as u64]);
            let mut samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                x,
                y,
                max_depth: h.max_depth,
                min_leaf: h.min_samples_leaf,
                n_candidates,
                rng,
                nodes: Vec::new(),
            };
            b.grow(&mut samples, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        hyper: *h,
        n_features: x.ncols(),
    })
}

pub fn predict_proba_forest(m: &ForestModel, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
    check_dim(m.n_features, x.ncols())?;
    if m.trees.is_empty() {
        return Err(ModelError::Empty);
    }
    let k = m.trees.len() as f64;
    Ok(x
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            m.trees.iter().map(|t| t.predict(&row)).sum::<f64>() / k
        })
        .collect())
}
