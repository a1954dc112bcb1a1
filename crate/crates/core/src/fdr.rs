//! Fisher discriminant ratio as a class-separability score.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrScore {
    /// One ratio per feature; `f64::INFINITY` where every class is constant.
    pub per_feature: Vec<f64>,
    /// Mean over the non-degenerate features.
    pub mean: f64,
    /// Features excluded from the mean.
    pub degenerate: Vec<usize>,
}

/// Per feature: `Σ n_k (μ_k − μ)² / Σ n_k σ_k²` with population class variances.
pub fn compute_fdr(ds: &Dataset) -> Result<FdrScore> {
    let classes = ds.present_classes();
    if classes.len() < 2 {
        return Err(Error::TooFewClasses(classes.len()));
    }
    let counts = ds.class_counts();
    let n = ds.n_samples() as f64;
    let d = ds.n_features();
    let k = ds.n_classes();

    let mut class_mean = vec![vec![0.0; d]; k];
    let mut overall = vec![0.0; d];
    for (row, &y) in ds.features().iter_rows().zip(ds.labels()) {
        for j in 0..d {
            class_mean[y][j] += row[j];
            overall[j] += row[j];
        }
    }
    for &c in &classes {
        class_mean[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    overall.iter_mut().for_each(|m| *m /= n);

    // Σ_k n_k σ_k² is the pooled within-class sum of squares.
    let mut within = vec![0.0; d];
    for (row, &y) in ds.features().iter_rows().zip(ds.labels()) {
        for j in 0..d {
            let e = row[j] - class_mean[y][j];
            within[j] += e * e;
        }
    }

    let mut per_feature = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for j in 0..d {
        let between: f64 = classes
            .iter()
            .map(|&c| {
                let e = class_mean[c][j] - overall[j];
                counts[c] as f64 * e * e
            })
            .sum();
        if within[j] == 0.0 {
            per_feature.push(f64::INFINITY);
            degenerate.push(j);
        } else {
            per_feature.push(between / within[j]);
        }
    }
    let finite: Vec<f64> = per_feature.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    Ok(FdrScore {
        per_feature,
        mean,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn one_feature(values: &[f64], labels: &[usize]) -> Dataset {
        let m = Matrix::new(values.len(), 1, values.to_vec()).unwrap();
        Dataset::new(m, labels.to_vec(), 2).unwrap()
    }

    #[test]
    fn hand_example() {
        // numerator 2·4 + 2·4 = 16, denominator 2·1 + 2·1 = 4
        let ds = one_feature(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        let f = compute_fdr(&ds).unwrap();
        assert_eq!(f.per_feature, vec![4.0]);
        assert_eq!(f.mean, 4.0);
    }

    #[test]
    fn equal_means_give_zero() {
        let ds = one_feature(&[0.0, 2.0, -1.0, 3.0], &[0, 0, 1, 1]);
        assert_eq!(compute_fdr(&ds).unwrap().mean, 0.0);
    }

    #[test]
    fn degenerate_features() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [5.0, 3.0], [5.0, 5.0]]).unwrap();
        let ds = Dataset::new(m, vec![0, 0, 1, 1], 2).unwrap();
        let f = compute_fdr(&ds).unwrap();
        assert!(f.per_feature[0].is_infinite());
        assert_eq!(f.degenerate, vec![0]);
        assert_eq!(f.mean, f.per_feature[1]);

        let ds = one_feature(&[1.0, 1.0, 3.0, 3.0], &[0, 0, 1, 1]);
        assert_eq!(compute_fdr(&ds), Err(Error::AllDegenerate));
        let ds = one_feature(&[1.0, 2.0], &[0, 0]);
        assert_eq!(compute_fdr(&ds), Err(Error::TooFewClasses(1)));
    }

    proptest! {
        #[test]
        fn feature_scaling_invariance(
            vals in prop::collection::vec(-100.0f64..100.0, 6..40),
            c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            let labels: Vec<usize> = (0..vals.len()).map(|i| i % 2).collect();
            let a = compute_fdr(&one_feature(&vals, &labels));
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let b = compute_fdr(&one_feature(&scaled, &labels));
            if let (Ok(a), Ok(b)) = (a, b) {
                let tol = 1e-9 * a.mean.abs().max(1.0);
                prop_assert!((a.mean - b.mean).abs() <= tol, "{} vs {}", a.mean, b.mean);
            }
        }
    }
}
