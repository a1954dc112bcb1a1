//! Confusion matrices, per-class F1, and run-to-run dispersion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[i][j]` = samples of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.n_classes())
            .filter(|&i| i != c)
            .map(|i| self.counts[i][c])
            .sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.n_classes())
            .filter(|&j| j != c)
            .map(|j| self.counts[c][j])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

/// Builds the confusion matrix over `n_classes` and derives the usual scores.
///
/// Undefined ratios (no predictions or no samples for a class) score 0.
pub fn confusion_and_metrics(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<(ConfusionMatrix, MetricsReport)> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::InvalidParameter(format!(
                "label {} outside 0..{n_classes}",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    let cm = ConfusionMatrix { counts };

    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision = Vec::with_capacity(n_classes);
    let mut recall = Vec::with_capacity(n_classes);
    let mut f1 = Vec::with_capacity(n_classes);
    let mut support = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let (tp, fp, fn_) = (
            cm.true_positives(c),
            cm.false_positives(c),
            cm.false_negatives(c),
        );
        precision.push(ratio(tp, tp + fp));
        recall.push(ratio(tp, tp + fn_));
        f1.push(ratio(2 * tp, 2 * tp + fp + fn_));
        support.push(tp + fn_);
    }
    let total = y_true.len() as u64;
    let macro_f1 = if n_classes == 0 {
        0.0
    } else {
        f1.iter().sum::<f64>() / n_classes as f64
    };
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        f1.iter()
            .zip(&support)
            .map(|(f, &s)| f * s as f64)
            .sum::<f64>()
            / total as f64
    };
    let correct: u64 = (0..n_classes).map(|c| cm.true_positives(c)).sum();
    let report = MetricsReport {
        precision,
        recall,
        f1,
        support,
        macro_f1,
        weighted_f1,
        accuracy: ratio(correct, total),
    };
    Ok((cm, report))
}

/// F1 of one class treated as positive.
pub fn f1_for_class(y_true: &[usize], y_pred: &[usize], positive: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == positive, p == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Population variance divided by the mean.
pub fn vmr(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "vmr needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Ok(var / mean)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Splits `total` into integer parts proportional to non-negative `weights`:
/// floors first, then one extra unit to the largest remainders (lower index
/// wins ties). All-zero weights give all zeros.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}
