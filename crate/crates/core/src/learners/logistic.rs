//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{check_width, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// L2 penalty applied to weights and biases alike.
    pub l2: f64,
    pub max_iter: usize,
    /// Fixed step; `None` uses 1/L for the loss's smoothness bound L.
    pub step: Option<f64>,
    /// Stop once the loss improves by less than this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            max_iter: 1000,
            step: None,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `[C × d]`
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub loss_history: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

impl LogisticModel {
    fn logits(&self, row: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c]
                + self
                    .weights
                    .row(c)
                    .iter()
                    .zip(row)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
        }
    }

    fn objective(&self, x: &Matrix, y: &[usize], l2: f64) -> f64 {
        let c = self.bias.len();
        let mut z = vec![0.0; c];
        let mut ce = 0.0;
        for (i, row) in x.iter_rows().enumerate() {
            self.logits(row, &mut z);
            softmax_in_place(&mut z);
            ce -= z[y[i]].max(1e-300).ln();
        }
        let reg: f64 = self.weights.as_slice().iter().chain(&self.bias).map(|w| w * w).sum();
        ce / x.rows() as f64 + 0.5 * l2 * reg
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.weights.cols()
    }

    fn n_classes(&self) -> usize {
        self.bias.len()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.weights.cols(), x)?;
        let mut out = Matrix::zeros(x.rows(), self.bias.len());
        for i in 0..x.rows() {
            let o = out.row_mut(i);
            self.logits(x.row(i), o);
            softmax_in_place(o);
        }
        Ok(out)
    }
}

pub fn train_logistic(
    features: &Matrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &LogisticConfig,
) -> Result<LogisticModel> {
    let n = features.rows();
    if n != labels.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::UnknownClass(bad));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    if !(cfg.l2 >= 0.0) {
        return Err(Error::InvalidParameter("l2 must be ≥ 0".into()));
    }
    let d = features.cols();
    let step = match cfg.step {
        Some(s) => s,
        None => {
            let r2 = features
                .iter_rows()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0)
                .fold(0.0, f64::max);
            1.0 / (0.5 * r2 + cfg.l2)
        }
    };
    let mut model = LogisticModel {
        weights: Matrix::zeros(n_classes, d),
        bias: vec![0.0; n_classes],
        loss_history: Vec::new(),
    };
    let mut loss = model.objective(features, labels, cfg.l2);
    model.loss_history.push(loss);
    let mut z = vec![0.0; n_classes];
    for _ in 0..cfg.max_iter {
        let mut gw = Matrix::zeros(n_classes, d);
        let mut gb = vec![0.0; n_classes];
        for (i, row) in features.iter_rows().enumerate() {
            model.logits(row, &mut z);
            softmax_in_place(&mut z);
            z[labels[i]] -= 1.0;
            for c in 0..n_classes {
                gb[c] += z[c];
                gw.row_mut(c)
                    .iter_mut()
                    .zip(row)
                    .for_each(|(g, x)| *g += z[c] * x);
            }
        }
        let inv = 1.0 / n as f64;
        for c in 0..n_classes {
            model.bias[c] -= step * (gb[c] * inv + cfg.l2 * model.bias[c]);
            for j in 0..d {
                let w = model.weights.get(c, j);
                model
                    .weights
                    .set(c, j, w - step * (gw.get(c, j) * inv + cfg.l2 * w));
            }
        }
        let next = model.objective(features, labels, cfg.l2);
        if !next.is_finite() {
            return Err(Error::DivergedLoss {
                epoch: model.loss_history.len(),
            });
        }
        model.loss_history.push(next);
        if (loss - next).abs() < cfg.tol {
            break;
        }
        loss = next;
    }
    Ok(model)
}
