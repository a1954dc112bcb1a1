//! Two-component principal component projection for visual overlap checks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct PcaOptions {
    /// Scale every feature to unit variance before the covariance is formed.
    pub standardize: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        PcaOptions { standardize: true }
    }
}

#[derive(Debug, Clone)]
pub struct Pca2d {
    /// `n_samples × 2` projected coordinates.
    pub points: Matrix,
    /// Leading unit eigenvectors; a missing component is all zeros.
    pub components: [Vec<f64>; 2],
    /// Matching eigenvalues of the (population) covariance.
    pub variances: [f64; 2],
    /// Number of components with a nonzero eigenvalue (at most 2).
    pub rank: usize,
}

pub fn pca_2d(ds: &Dataset) -> Result<Pca2d> {
    pca_2d_with(ds, PcaOptions::default())
}

/// Projects onto the top two covariance eigenvectors. Each eigenvector's
/// largest-magnitude entry is made positive so the output is sign-stable.
pub fn pca_2d_with(ds: &Dataset, opts: PcaOptions) -> Result<Pca2d> {
    let (n, d) = (ds.n_samples(), ds.n_features());
    if d < 2 || n < 3 {
        return Err(Error::InvalidParameter(format!(
            "pca needs ≥2 features and ≥3 samples, got {d} and {n}"
        )));
    }
    let mut scaler = Standardizer::fit(ds.features());
    if !opts.standardize {
        scaler.scale = vec![1.0; d];
    }
    let centered = scaler.transform(ds.features());

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in centered.iter_rows() {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let trace: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let tiny = 1e-12 * trace.max(1e-300);

    let mut components = [vec![0.0; d], vec![0.0; d]];
    let mut variances = [0.0; 2];
    let mut rank = 0;
    for (slot, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= tiny {
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components[slot] = v;
        variances[slot] = lambda;
        rank += 1;
    }

    let mut points = Matrix::zeros(n, 2);
    for i in 0..n {
        let r = centered.row(i);
        for (slot, comp) in components.iter().enumerate() {
            let p: f64 = r.iter().zip(comp).map(|(a, b)| a * b).sum();
            points.set(i, slot, p);
        }
    }
    Ok(Pca2d {
        points,
        components,
        variances,
        rank,
    })
}
