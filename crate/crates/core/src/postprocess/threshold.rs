//! Decision thresholds: F1-maximizing grid search, one-vs-rest tuning and
//! cost-derived thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};
use crate::metrics::f1_for_class;

/// Floor used when dividing by a zero threshold in the ratio policy.
pub const TAU_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum DecisionPolicy {
    /// Predict `positive` when its probability reaches the single threshold,
    /// otherwise the most probable other class.
    Binary { positive: usize },
    /// Among classes with `p_c ≥ τ_c` pick the largest `p_c / τ_c`; when no
    /// class qualifies fall back to the plain argmax.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub thresholds: Vec<f64>,
    pub policy: DecisionPolicy,
}

impl ThresholdRule {
    pub fn binary(tau: f64, positive: usize) -> Self {
        ThresholdRule {
            thresholds: vec![tau],
            policy: DecisionPolicy::Binary { positive },
        }
    }

    pub fn ratio(thresholds: Vec<f64>) -> Self {
        ThresholdRule {
            thresholds,
            policy: DecisionPolicy::Ratio,
        }
    }

    pub fn decide_row(&self, p: &[f64]) -> usize {
        match self.policy {
            DecisionPolicy::Binary { positive } => {
                if p[positive] >= self.thresholds[0] {
                    positive
                } else {
                    let mut best = usize::MAX;
                    for c in 0..p.len() {
                        if c != positive && (best == usize::MAX || p[c] > p[best]) {
                            best = c;
                        }
                    }
                    best
                }
            }
            DecisionPolicy::Ratio => {
                let mut best: Option<(usize, f64)> = None;
                for (c, (&pc, &tc)) in p.iter().zip(&self.thresholds).enumerate() {
                    if pc >= tc {
                        let r = pc / tc.max(TAU_FLOOR);
                        if best.map_or(true, |b| r > b.1) {
                            best = Some((c, r));
                        }
                    }
                }
                best.map_or_else(|| argmax(p), |b| b.0)
            }
        }
    }

    pub fn decide(&self, probs: &Matrix) -> Result<Vec<usize>> {
        let need = match self.policy {
            DecisionPolicy::Binary { positive } => positive + 1,
            DecisionPolicy::Ratio => self.thresholds.len(),
        };
        if probs.cols() < need
            || matches!(self.policy, DecisionPolicy::Ratio) && probs.cols() != need
        {
            return Err(Error::ShapeMismatch {
                expected: need,
                got: probs.cols(),
            });
        }
        Ok(probs.iter_rows().map(|r| self.decide_row(r)).collect())
    }
}

/// Grid `{0, δ, 2δ, …}` up to 1. When δ divides 1 the points are computed as
/// `k / n` so that e.g. 0.5 is hit exactly; 0.5 is added otherwise.
pub fn threshold_grid(delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} not in (0, 1]")));
    }
    let n = (1.0 / delta).round();
    let mut grid: Vec<f64> = if (n * delta - 1.0).abs() < 1e-9 {
        (0..=n as usize).map(|k| k as f64 / n).collect()
    } else {
        let mut g: Vec<f64> = (0..)
            .map(|k| k as f64 * delta)
            .take_while(|&t| t <= 1.0)
            .collect();
        g.push(0.5);
        g
    };
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

fn binary_f1(scores: &[f64], positive: &[bool], tau: f64) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0u64, 0u64, 0u64);
    for (&s, &y) in scores.iter().zip(positive) {
        match (s >= tau, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fnn;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Smallest grid threshold maximizing positive-class F1, with that F1.
fn best_threshold(scores: &[f64], positive: &[bool], delta: f64) -> Result<(f64, f64)> {
    let mut best = (0.0, f64::NEG_INFINITY);
    for tau in threshold_grid(delta)? {
        let f = binary_f1(scores, positive, tau);
        if f > best.1 {
            best = (tau, f);
        }
    }
    Ok(best)
}

/// Tunes the threshold for binary labels where 1 is the positive class.
/// Returns the rule and the F1 it reaches.
pub fn tune_threshold(probs_positive: &[f64], y_true: &[usize], delta: f64) -> Result<(ThresholdRule, f64)> {
    tune_threshold_for(probs_positive, y_true, 1, delta)
}

/// As [`tune_threshold`] with an explicit positive class.
pub fn tune_threshold_for(
    probs_positive: &[f64],
    y_true: &[usize],
    positive: usize,
    delta: f64,
) -> Result<(ThresholdRule, f64)> {
    if probs_positive.len() != y_true.len() {
        return Err(Error::LengthMismatch {
            left: probs_positive.len(),
            right: y_true.len(),
        });
    }
    let pos: Vec<bool> = y_true.iter().map(|&y| y == positive).collect();
    if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
        return Err(Error::SingleClassLabels);
    }
    let (tau, f1) = best_threshold(probs_positive, &pos, delta)?;
    Ok((ThresholdRule::binary(tau, positive), f1))
}

/// One-vs-rest tuning: τ_c maximizes class-c F1 on the c-vs-rest task. Classes
/// whose task has a single label keep τ_c = 0.5.
pub fn tune_thresholds_ovr(probs: &Matrix, y_true: &[usize], delta: f64) -> Result<ThresholdRule> {
    if probs.rows() != y_true.len() {
        return Err(Error::LengthMismatch {
            left: probs.rows(),
            right: y_true.len(),
        });
    }
    let c = probs.cols();
    if c < 3 {
        return Err(Error::InvalidParameter("one-vs-rest tuning needs ≥ 3 classes".into()));
    }
    let mut taus = Vec::with_capacity(c);
    for k in 0..c {
        let pos: Vec<bool> = y_true.iter().map(|&y| y == k).collect();
        if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
            taus.push(0.5);
            continue;
        }
        taus.push(best_threshold(&probs.column(k), &pos, delta)?.0);
    }
    Ok(ThresholdRule::ratio(taus))
}

/// Misclassification costs for one class treated as positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub c_fp: f64,
    pub c_fn: f64,
}

/// `τ = C_FP / (C_FP + C_FN)`.
pub fn cost_threshold(costs: CostSpec) -> Result<f64> {
    if !(costs.c_fp >= 0.0 && costs.c_fn >= 0.0) {
        return Err(Error::InvalidParameter("costs must be non-negative".into()));
    }
    let s = costs.c_fp + costs.c_fn;
    if s == 0.0 {
        return Err(Error::ZeroCosts);
    }
    Ok(costs.c_fp / s)
}

/// Per-class cost thresholds combined with the ratio policy.
pub fn cost_thresholds(costs: &[CostSpec]) -> Result<ThresholdRule> {
    Ok(ThresholdRule::ratio(
        costs.iter().map(|&c| cost_threshold(c)).collect::<Result<_>>()?,
    ))
}

/// Positive-class F1 of `rule` on `probs` (used by tests and the harness).
pub fn rule_f1(rule: &ThresholdRule, probs: &Matrix, y_true: &[usize], class: usize) -> Result<f64> {
    Ok(f1_for_class(y_true, &rule.decide(probs)?, class))
}
