//! CART classification tree with weighted Gini impurity.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_width, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt() as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        probs: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl TreeModel {
    pub fn leaf_for(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probs } => return probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Adds this tree's leaf distribution for every row of `x` into `acc`.
    pub(crate) fn accumulate_proba(&self, x: &Matrix, acc: &mut Matrix) {
        for i in 0..x.rows() {
            let p = self.leaf_for(x.row(i));
            for (a, v) in acc.row_mut(i).iter_mut().zip(p) {
                *a += v;
            }
        }
    }
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.n_features, x)?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        self.accumulate_proba(x, &mut out);
        Ok(out)
    }
}

/// Grows a tree greedily on weighted Gini impurity.
///
/// `seed` only matters when `max_features` subsamples candidate features.
pub fn train_tree(
    ds: &Dataset,
    sample_weights: Option<&[f64]>,
    cfg: &TreeConfig,
    seed: Seed,
) -> Result<TreeModel> {
    let weights = resolve_weights(ds, sample_weights)?;
    let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| weights[i] > 0.0).collect();
    grow(ds, &weights, rows, cfg, seed)
}

pub(crate) fn resolve_weights(ds: &Dataset, w: Option<&[f64]>) -> Result<Vec<f64>> {
    match w {
        None => Ok(vec![1.0; ds.n_samples()]),
        Some(w) => {
            if w.len() != ds.n_samples() {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: ds.n_samples(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(
                    "sample weights must be finite and non-negative".into(),
                ));
            }
            Ok(w.to_vec())
        }
    }
}

struct Frame {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

/// Shared by single trees and forests (which pass bootstrap counts as weights).
pub(crate) fn grow(
    ds: &Dataset,
    weights: &[f64],
    mut idx: Vec<usize>,
    cfg: &TreeConfig,
    seed: Seed,
) -> Result<TreeModel> {
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if idx.len() < cfg.min_samples_leaf {
        return Err(Error::InvalidParameter(format!(
            "{} samples is below min_samples_leaf {}",
            idx.len(),
            cfg.min_samples_leaf
        )));
    }
    let k = ds.n_classes();
    let d = ds.n_features();
    let x = ds.features();
    let y = ds.labels();
    let min_leaf = cfg.min_samples_leaf.max(1);
    let mtry = cfg.max_features.resolve(d);
    let mut rng = seed.rng();
    let mut feature_order: Vec<usize> = (0..d).collect();

    let mut nodes: Vec<Node> = vec![Node::Leaf { probs: vec![] }];
    let mut stack = vec![Frame {
        node: 0,
        start: 0,
        end: idx.len(),
        depth: 0,
    }];
    let mut sorted: Vec<usize> = Vec::with_capacity(idx.len());
    let mut left_w = vec![0.0; k];

    while let Some(f) = stack.pop() {
        let members = &idx[f.start..f.end];
        let mut totals = vec![0.0; k];
        for &i in members {
            totals[y[i]] += weights[i];
        }
        let total_w: f64 = totals.iter().sum();
        let n = members.len();
        let pure = totals.iter().filter(|&&t| t > 0.0).count() <= 1;
        let stop = pure
            || cfg.max_depth.is_some_and(|m| f.depth >= m)
            || n < cfg.min_samples_split.max(2)
            || n < 2 * min_leaf;

        let mut best: Option<(usize, f64, f64)> = None; // feature, threshold, score
        if !stop {
            if mtry < d {
                feature_order.shuffle(&mut rng);
            }
            for (tried, &feat) in feature_order.iter().enumerate() {
                if tried >= mtry && best.is_some() {
                    break;
                }
                sorted.clear();
                sorted.extend_from_slice(members);
                sorted.sort_unstable_by(|&a, &b| {
                    x.get(a, feat).total_cmp(&x.get(b, feat)).then(a.cmp(&b))
                });
                left_w.iter_mut().for_each(|v| *v = 0.0);
                let mut wl = 0.0;
                for pos in 0..n - 1 {
                    let i = sorted[pos];
                    left_w[y[i]] += weights[i];
                    wl += weights[i];
                    let (nl, nr) = (pos + 1, n - pos - 1);
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let (a, b) = (x.get(i, feat), x.get(sorted[pos + 1], feat));
                    if a >= b {
                        continue;
                    }
                    let wr = total_w - wl;
                    if wl <= 0.0 || wr <= 0.0 {
                        continue;
                    }
                    // Minimising weighted Gini ⇔ maximising Σ l²/wl + Σ r²/wr.
                    let mut sl = 0.0;
                    let mut sr = 0.0;
                    for c in 0..k {
                        let l = left_w[c];
                        let r = totals[c] - l;
                        sl += l * l;
                        sr += r * r;
                    }
                    let score = sl / wl + sr / wr;
                    if best.map_or(true, |(_, _, s)| score > s) {
                        let mut t = 0.5 * (a + b);
                        if t >= b {
                            t = a;
                        }
                        best = Some((feat, t, score));
                    }
                }
            }
        }

        match best {
            None => {
                let probs = if total_w > 0.0 {
                    totals.iter().map(|t| t / total_w).collect()
                } else {
                    vec![1.0 / k as f64; k]
                };
                nodes[f.node] = Node::Leaf { probs };
            }
            Some((feature, threshold, _)) => {
                let slice = &mut idx[f.start..f.end];
                let mut mid = 0;
                for j in 0..slice.len() {
                    if x.get(slice[j], feature) <= threshold {
                        slice.swap(mid, j);
                        mid += 1;
                    }
                }
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { probs: vec![] });
                nodes.push(Node::Leaf { probs: vec![] });
                nodes[f.node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push(Frame {
                    node: right,
                    start: f.start + mid,
                    end: f.end,
                    depth: f.depth + 1,
                });
                stack.push(Frame {
                    node: left,
                    start: f.start,
                    end: f.start + mid,
                    depth: f.depth + 1,
                });
            }
        }
    }

    Ok(TreeModel {
        nodes,
        n_features: d,
        n_classes: k,
        max_depth: cfg.max_depth,
        min_samples_leaf: min_leaf,
    })
}
