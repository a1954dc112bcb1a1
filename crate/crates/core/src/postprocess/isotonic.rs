//! Isotonic calibration by pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Monotone step function: `values[i]` applies from `breakpoints[i]` up to the
/// next breakpoint, clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicMap {
    pub fn apply_one(&self, s: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= s);
        self.values[i.saturating_sub(1)]
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply_one(s)).collect()
    }
}

/// Weighted PAVA over blocks already in score order. Returns one fitted value
/// per input block.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // (mean, weight, number of input blocks merged)
    let mut stack: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1);
        while let Some(&(pm, pw, pn)) = stack.last() {
            if pm <= cur.0 {
                break;
            }
            stack.pop();
            let tw = pw + cur.1;
            cur = ((pm * pw + cur.0 * cur.1) / tw, tw, pn + cur.2);
        }
        stack.push(cur);
    }
    stack
        .into_iter()
        .flat_map(|(m, _, n)| std::iter::repeat(m).take(n))
        .collect()
}

pub fn isotonic_fit(scores: &[f64], y_binary: &[f64]) -> Result<IsotonicMap> {
    if scores.len() != y_binary.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: y_binary.len(),
        });
    }
    if scores.iter().chain(y_binary).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteProb);
    }
    let lo = y_binary.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y_binary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if scores.len() < 2 || lo == hi {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut breakpoints = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for &i in &order {
        if breakpoints.last() == Some(&scores[i]) {
            *sums.last_mut().unwrap() += y_binary[i];
            *counts.last_mut().unwrap() += 1.0;
        } else {
            breakpoints.push(scores[i]);
            sums.push(y_binary[i]);
            counts.push(1.0);
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, n)| s / n).collect();
    Ok(IsotonicMap {
        breakpoints,
        values: pava(&means, &counts),
    })
}

pub fn isotonic_apply(map: &IsotonicMap, scores: &[f64]) -> Vec<f64> {
    map.apply(scores)
}

/// One-vs-rest isotonic maps on class probabilities. Classes absent from (or
/// covering all of) the fitting labels pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicCalibrator {
    pub maps: Vec<Option<IsotonicMap>>,
}

impl IsotonicCalibrator {
    pub fn fit(probs: &Matrix, labels: &[usize]) -> Result<Self> {
        if probs.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: probs.rows(),
                right: labels.len(),
            });
        }
        let mut maps = Vec::with_capacity(probs.cols());
        for c in 0..probs.cols() {
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
            maps.push(match isotonic_fit(&probs.column(c), &y) {
                Ok(m) => Some(m),
                Err(Error::SingleClassLabels) => None,
                Err(e) => return Err(e),
            });
        }
        Ok(IsotonicCalibrator { maps })
    }

    /// Calibrated probabilities, renormalized per row. A row whose calibrated
    /// values are all zero keeps its input probabilities.
    pub fn apply(&self, probs: &Matrix) -> Result<Matrix> {
        if probs.cols() != self.maps.len() {
            return Err(Error::ShapeMismatch {
                expected: self.maps.len(),
                got: probs.cols(),
            });
        }
        let mut out = probs.clone();
        for i in 0..probs.rows() {
            let row = out.row_mut(i);
            let orig = row.to_vec();
            for (c, m) in self.maps.iter().enumerate() {
                if let Some(m) = m {
                    row[c] = m.apply_one(orig[c]);
                }
            }
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.copy_from_slice(&orig);
            }
        }
        Ok(out)
    }
}
