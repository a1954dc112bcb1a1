//! Cross-entropy family losses on SoftMax outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};

pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    WeightedCe,
    Focal,
    WeightedFocal,
}

/// `gamma` is read only by the focal kinds and `alpha` (one entry per class)
/// only by the weighted kinds. An empty `alpha` means 1 for every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSpec {
    pub kind: LossKind,
    pub gamma: f64,
    pub alpha: Vec<f64>,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec::cross_entropy()
    }
}

impl LossSpec {
    pub fn cross_entropy() -> Self {
        LossSpec {
            kind: LossKind::CrossEntropy,
            gamma: 0.0,
            alpha: Vec::new(),
        }
    }

    pub fn weighted_ce(alpha: Vec<f64>) -> Self {
        LossSpec {
            kind: LossKind::WeightedCe,
            gamma: 0.0,
            alpha,
        }
    }

    pub fn focal(gamma: f64) -> Self {
        LossSpec {
            kind: LossKind::Focal,
            gamma,
            alpha: Vec::new(),
        }
    }

    pub fn weighted_focal(gamma: f64, alpha: Vec<f64>) -> Self {
        LossSpec {
            kind: LossKind::WeightedFocal,
            gamma,
            alpha,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma {}", self.gamma)));
        }
        if self.uses_alpha() && !self.alpha.is_empty() {
            if self.alpha.len() != n_classes {
                return Err(Error::ShapeMismatch {
                    expected: n_classes,
                    got: self.alpha.len(),
                });
            }
            if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidParameter("alpha must be positive".into()));
            }
        }
        Ok(())
    }

    fn uses_alpha(&self) -> bool {
        matches!(self.kind, LossKind::WeightedCe | LossKind::WeightedFocal)
    }

    pub fn effective_gamma(&self) -> f64 {
        match self.kind {
            LossKind::Focal | LossKind::WeightedFocal => self.gamma,
            _ => 0.0,
        }
    }

    pub fn effective_alpha(&self, class: usize) -> f64 {
        if self.uses_alpha() {
            self.alpha.get(class).copied().unwrap_or(1.0)
        } else {
            1.0
        }
    }

    /// Loss of one sample whose true class has SoftMax probability `p`, and
    /// the factor `g` such that dL/dz_j = g·(δ_cj − p_j) for logits z.
    pub(crate) fn value_and_logit_factor(&self, class: usize, p: f64) -> (f64, f64) {
        let a = self.effective_alpha(class);
        let g = self.effective_gamma();
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let q = 1.0 - p;
        let lnp = p.ln();
        let mod_ = q.powf(g);
        let loss = -a * mod_ * lnp;
        let dmod = if g == 0.0 { 0.0 } else { g * p * q.powf(g - 1.0) * lnp };
        (loss, a * (dmod - mod_))
    }
}

/// Mean over rows of −α_c·(1−p_c)^γ·ln p_c, where c is the one-hot class and
/// `alpha` holds one weight per class (a single entry is broadcast).
pub fn focal_loss(y_true_onehot: &Matrix, probs: &Matrix, gamma: f64, alpha: &[f64]) -> Result<f64> {
    if y_true_onehot.rows() != probs.rows() {
        return Err(Error::LengthMismatch {
            left: y_true_onehot.rows(),
            right: probs.rows(),
        });
    }
    if y_true_onehot.cols() != probs.cols() {
        return Err(Error::ShapeMismatch {
            expected: y_true_onehot.cols(),
            got: probs.cols(),
        });
    }
    if probs.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for i in 0..probs.rows() {
        let c = argmax(y_true_onehot.row(i));
        let p = probs.get(i, c);
        if !p.is_finite() {
            return Err(Error::NonFiniteProb);
        }
        let a = match alpha.len() {
            0 => 1.0,
            1 => alpha[0],
            _ => alpha[c],
        };
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total += -a * (1.0 - p).powf(gamma) * p.ln();
    }
    Ok(total / probs.rows() as f64)
}
