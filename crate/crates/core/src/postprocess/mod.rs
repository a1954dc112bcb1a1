//! Prediction-level mitigation: thresholds, reweighting, calibration and
//! sample-weighted retraining.

pub mod isotonic;
pub mod threshold;

use crate::dataset::{ClassWeights, Dataset};
use crate::error::{Error, Result};
use crate::learners::{Classifier, LearnerSpec};
use crate::matrix::Matrix;
use crate::seed::Seed;

pub use isotonic::{isotonic_apply, isotonic_fit, pava, IsotonicCalibrator, IsotonicMap};
pub use threshold::{
    cost_threshold, cost_thresholds, rule_f1, threshold_grid, tune_threshold, tune_threshold_for,
    tune_thresholds_ovr, CostSpec, DecisionPolicy, ThresholdRule,
};

/// Default multiplier for misclassified training rows.
pub const DEFAULT_MISCLASSIFIED_FACTOR: f64 = 2.0;

/// `p'_c ∝ p_c · (1 + scale · (CW_c − 1))`, rows renormalized. Factors below
/// zero are clamped to zero; a row whose reweighted mass vanishes is kept.
pub fn reweight_predictions(probs: &Matrix, weights: &ClassWeights, scale: f64) -> Result<Matrix> {
    if weights.weights.len() != probs.cols() {
        return Err(Error::ShapeMismatch {
            expected: probs.cols(),
            got: weights.weights.len(),
        });
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be ≥ 0")));
    }
    let factors: Vec<f64> = weights
        .weights
        .iter()
        .map(|&w| (1.0 + scale * (w - 1.0)).max(0.0))
        .collect();
    if factors.iter().all(|&f| f == factors[0]) && factors[0] > 0.0 {
        return Ok(probs.clone());
    }
    let mut out = probs.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let s: f64 = row.iter().zip(&factors).map(|(p, f)| p * f).sum();
        if s > 0.0 {
            row.iter_mut().zip(&factors).for_each(|(p, f)| *p = *p * f / s);
        }
    }
    Ok(out)
}

pub struct SampleWeighting {
    pub model: Box<dyn Classifier>,
    pub weights: Vec<f64>,
    /// Training rows the first model got wrong.
    pub misclassified: Vec<usize>,
}

/// Trains once, multiplies the weight of every misclassified training row by
/// `factor`, and retrains with those weights under the same seed.
pub fn sample_weighting(
    ds: &Dataset,
    learner: &LearnerSpec,
    factor: f64,
    seed: Seed,
) -> Result<SampleWeighting> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter(format!("factor {factor} must be > 0")));
    }
    let first = learner.fit(ds, None, seed)?;
    let pred = first.predict(ds.features())?;
    let misclassified: Vec<usize> = (0..ds.n_samples())
        .filter(|&i| pred[i] != ds.labels()[i])
        .collect();
    let mut weights = vec![1.0; ds.n_samples()];
    for &i in &misclassified {
        weights[i] *= factor;
    }
    let model = learner.fit(ds, Some(&weights), seed)?;
    Ok(SampleWeighting {
        model,
        weights,
        misclassified,
    })
}
