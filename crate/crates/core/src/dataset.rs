//! Labelled tabular data and the class-balance bookkeeping built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature matrix plus integer labels in `0..n_classes`.
///
/// `n_classes` is carried explicitly so that a split which happens to miss a
/// class still agrees with its parent on the label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        if features.cols() == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if let Some(bad) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value in row {}",
                bad / features.cols()
            )));
        }
        let mut class_counts = vec![0usize; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::InvalidDataset(format!(
                    "label {y} outside 0..{n_classes}"
                )));
            }
            class_counts[y] += 1;
        }
        Ok(Dataset {
            features,
            labels,
            n_classes,
            class_counts,
        })
    }

    /// A dataset with no rows. Only samplers asked for zero rows produce one;
    /// every other constructor requires at least one sample.
    pub fn empty(n_features: usize, n_classes: usize) -> Self {
        Dataset {
            features: Matrix::zeros(0, n_features),
            labels: Vec::new(),
            n_classes,
            class_counts: vec![0; n_classes],
        }
    }

    /// Builds from row slices, inferring `n_classes` as `max(label) + 1`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map(|m| m + 1).unwrap_or(0);
        Dataset::new(Matrix::from_rows(rows)?, labels, n_classes)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Classes with at least one sample.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.n_classes)
            .filter(|&c| self.class_counts[c] > 0)
            .collect()
    }

    /// Row indices of class `c`, ascending.
    pub fn class_indices(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Most populated class (lowest id on ties).
    pub fn majority_class(&self) -> usize {
        let mut best = 0;
        for c in 1..self.n_classes {
            if self.class_counts[c] > self.class_counts[best] {
                best = c;
            }
        }
        best
    }

    /// Least populated present class (lowest id on ties).
    pub fn minority_class(&self) -> usize {
        let mut best: Option<usize> = None;
        for c in 0..self.n_classes {
            let n = self.class_counts[c];
            if n == 0 {
                continue;
            }
            if best.map_or(true, |b| n < self.class_counts[b]) {
                best = Some(c);
            }
        }
        best.unwrap_or(0)
    }

    /// Rows at `indices` in order; duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        let mut class_counts = vec![0usize; self.n_classes];
        for &y in &labels {
            class_counts[y] += 1;
        }
        Dataset {
            features: self.features.select_rows(indices),
            labels,
            n_classes: self.n_classes,
            class_counts,
        }
    }

    /// Same rows with different labels (label-flipping resamplers).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.n_classes)
    }

    /// Appends rows of `other`, which must share the feature width and label space.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features() != self.n_features() {
            return Err(Error::ShapeMismatch {
                expected: self.n_features(),
                got: other.n_features(),
            });
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let n_classes = self.n_classes.max(other.n_classes);
        Dataset::new(
            Matrix::new(labels.len(), self.n_features(), data)?,
            labels,
            n_classes,
        )
    }

    /// Appends raw synthetic rows, all labelled `class`.
    pub fn append_rows(&self, rows: &[Vec<f64>], class: usize) -> Result<Dataset> {
        if rows.is_empty() {
            return Ok(self.clone());
        }
        let mut features = self.features.clone();
        for r in rows {
            features.push_row(r)?;
        }
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat(class).take(rows.len()));
        Dataset::new(features, labels, self.n_classes.max(class + 1))
    }
}

/// Per-class weights `n_samples / (n_classes * n_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
}

impl ClassWeights {
    pub fn get(&self, class: usize) -> f64 {
        self.weights[class]
    }

    /// Expands to one weight per sample of `labels`.
    pub fn per_sample(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().map(|&y| self.weights[y]).collect()
    }
}

/// Class weights that make every class carry the same total weight.
pub fn class_weights(ds: &Dataset) -> Result<ClassWeights> {
    class_weights_from_counts(ds.class_counts())
}

pub fn class_weights_from_counts(counts: &[usize]) -> Result<ClassWeights> {
    if counts.len() < 2 {
        return Err(Error::TooFewClasses(counts.len()));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(c));
    }
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(ClassWeights {
        weights: counts
            .iter()
            .map(|&ni| n as f64 / (k * ni as f64))
            .collect(),
    })
}

/// Column means and population standard deviations; zero deviations become 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for j in 0..d {
                let e = r[j] - mean[j];
                var[j] += e * e;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..x.rows() {
            let (src, dst) = (x.row(i), out.row_mut(i));
            for j in 0..src.len() {
                dst[j] = (src[j] - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| v * self.scale[j] + self.mean[j])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_input() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(
            Dataset::new(m, vec![0], 1),
            Err(Error::InvalidDataset(_))
        ));
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(Dataset::new(m.clone(), vec![2], 2).is_err());
        assert_eq!(Dataset::new(m, vec![], 2), Err(Error::EmptyDataset));
    }

    #[test]
    fn weights_examples() {
        let w = class_weights_from_counts(&[90, 10]).unwrap();
        assert!((w.get(0) - 100.0 / 180.0).abs() < 1e-12);
        assert!((w.get(1) - 5.0).abs() < 1e-12);
        let w = class_weights_from_counts(&[50, 50]).unwrap();
        assert_eq!(w.weights, vec![1.0, 1.0]);
        let w = class_weights_from_counts(&[2184, 224, 152, 991, 254, 325]).unwrap();
        assert!((w.get(2) - 4130.0 / (6.0 * 152.0)).abs() < 1e-12);
        assert!((w.get(2) - 4.528).abs() < 1e-3);
        assert_eq!(
            class_weights_from_counts(&[3, 0, 1]),
            Err(Error::MissingClass(1))
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn weights_conserve_mass(counts in prop::collection::vec(1usize..5000, 2..10)) {
            let w = class_weights_from_counts(&counts).unwrap();
            let n: usize = counts.iter().sum();
            let total: f64 = counts.iter().zip(&w.weights).map(|(&c, &wi)| c as f64 * wi).sum();
            prop_assert!((total - n as f64).abs() <= 1e-9);
        }
    }
}
