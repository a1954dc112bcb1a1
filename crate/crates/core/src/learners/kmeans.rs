//! Lloyd's K-Means with k-means++ seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub n_iter: usize,
}

impl KMeansModel {
    pub fn cluster_members(&self, c: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == c)
            .collect()
    }
}

fn nearest(centroids: &Matrix, row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(row, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    points.iter_rows().map(|r| nearest(centroids, r)).unzip()
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(0, points.cols());
    centroids
        .push_row(points.row(rng.random_range(0..n)))
        .expect("width");
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|r| sq_dist(r, centroids.row(0)))
        .collect();
    while centroids.rows() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push_row(points.row(pick)).expect("width");
        let c = centroids.rows() - 1;
        for (i, r) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centroids.row(c)));
        }
    }
    centroids
}

pub fn kmeans_fit(points: &Matrix, cfg: &KMeansConfig, seed: Seed) -> Result<KMeansModel> {
    let n = points.rows();
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    if cfg.k > n {
        return Err(Error::KTooLarge {
            k: cfg.k,
            available: n,
        });
    }
    let d = points.cols();
    let mut rng = seed.rng();
    let mut centroids = plus_plus(points, cfg.k, &mut rng);
    let mut history = Vec::new();
    let mut n_iter = 0;
    for _ in 0..cfg.max_iter {
        n_iter += 1;
        let (assignments, dists) = assign(points, &centroids);
        history.push(dists.iter().sum());
        let mut sums = Matrix::zeros(cfg.k, d);
        let mut counts = vec![0usize; cfg.k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            sums.row_mut(c)
                .iter_mut()
                .zip(points.row(i))
                .for_each(|(s, v)| *s += v);
        }
        let mut taken = vec![false; n];
        let mut shift: f64 = 0.0;
        let mut next = Matrix::zeros(cfg.k, d);
        for c in 0..cfg.k {
            if counts[c] > 0 {
                let m = counts[c] as f64;
                next.row_mut(c)
                    .iter_mut()
                    .zip(sums.row(c))
                    .for_each(|(o, s)| *o = s / m);
            } else {
                // Reseed on the point currently worst served.
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold((0, -1.0), |b, i| if dists[i] > b.1 { (i, dists[i]) } else { b })
                    .0;
                taken[far] = true;
                next.row_mut(c).copy_from_slice(points.row(far));
            }
            shift = shift.max(sq_dist(next.row(c), centroids.row(c)).sqrt());
        }
        centroids = next;
        if shift < cfg.tol {
            break;
        }
    }
    let (assignments, dists) = assign(points, &centroids);
    let inertia: f64 = dists.iter().sum();
    history.push(inertia);
    Ok(KMeansModel {
        k: cfg.k,
        centroids,
        assignments,
        inertia,
        inertia_history: history,
        n_iter,
    })
}
