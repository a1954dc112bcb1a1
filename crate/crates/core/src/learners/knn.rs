//! Exact k-nearest-neighbour search by linear scan.

use std::cmp::Ordering;

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// Points (optionally standardized) plus their labels.
///
/// Distances are Euclidean in the stored space; ties go to the lower index.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: Matrix,
    labels: Vec<usize>,
    scaler: Standardizer,
}

impl KnnIndex {
    pub fn new(points: &Matrix, labels: Vec<usize>, standardize: bool) -> Self {
        let scaler = if standardize {
            Standardizer::fit(points)
        } else {
            Standardizer::identity(points.cols())
        };
        KnnIndex {
            points: scaler.transform(points),
            labels,
            scaler,
        }
    }

    /// Index over a dataset's rows on standardized features.
    pub fn from_dataset(ds: &Dataset) -> Self {
        KnnIndex::new(ds.features(), ds.labels().to_vec(), true)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// `k` nearest indexed points to an external query point.
    pub fn query(&self, point: &[f64], k: usize, class: Option<usize>) -> Result<Vec<usize>> {
        let mut q = vec![0.0; point.len()];
        self.scaler.transform_row(point, &mut q);
        self.search(&q, k, class, None)
    }

    /// `k` nearest neighbours of indexed point `i`, excluding `i` itself.
    pub fn query_member(&self, i: usize, k: usize, class: Option<usize>) -> Result<Vec<usize>> {
        let q = self.points.row(i).to_vec();
        self.search(&q, k, class, Some(i))
    }

    fn search(
        &self,
        q: &[f64],
        k: usize,
        class: Option<usize>,
        exclude: Option<usize>,
    ) -> Result<Vec<usize>> {
        let mut cand: Vec<(f64, usize)> = (0..self.len())
            .filter(|&j| Some(j) != exclude && class.map_or(true, |c| self.labels[j] == c))
            .map(|j| (sq_dist(q, self.points.row(j)), j))
            .collect();
        if k > cand.len() {
            return Err(Error::KTooLarge {
                k,
                available: cand.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_unstable_by(cmp);
        Ok(cand.into_iter().map(|(_, j)| j).collect())
    }

    /// Nearest other point for every indexed point (global 1-NN).
    pub fn nearest_of_all(&self) -> Vec<usize> {
        let n = self.len();
        let mut best = vec![(f64::INFINITY, usize::MAX); n];
        for i in 0..n {
            let a = self.points.row(i);
            for j in (i + 1)..n {
                let d = sq_dist(a, self.points.row(j));
                if d < best[i].0 || (d == best[i].0 && j < best[i].1) {
                    best[i] = (d, j);
                }
                if d < best[j].0 || (d == best[j].0 && i < best[j].1) {
                    best[j] = (d, i);
                }
            }
        }
        best.into_iter().map(|(_, j)| j).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use rand::Rng;

    #[test]
    fn small_examples() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]]).unwrap();
        let idx = KnnIndex::new(&pts, vec![0, 0, 0], false);
        assert_eq!(idx.query(&[0.9, 0.0], 1, None).unwrap(), vec![1]);
        assert_eq!(idx.query(&[0.9, 0.0], 3, None).unwrap(), vec![1, 0, 2]);
        assert_eq!(idx.query_member(0, 2, None).unwrap(), vec![1, 2]);
        assert!(matches!(
            idx.query_member(0, 3, None),
            Err(Error::KTooLarge { k: 3, available: 2 })
        ));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pts = Matrix::from_rows(&[[1.0], [-1.0], [1.0]]).unwrap();
        let idx = KnnIndex::new(&pts, vec![0, 1, 0], false);
        assert_eq!(idx.query(&[0.0], 3, None).unwrap(), vec![0, 1, 2]);
        assert_eq!(idx.query(&[0.0], 1, Some(0)).unwrap(), vec![0]);
        assert_eq!(idx.nearest_of_all(), vec![2, 0, 0]);
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = Seed(21).rng();
        for _ in 0..100 {
            let rows: Vec<[f64; 3]> = (0..50)
                .map(|_| [rng.random(), rng.random(), rng.random()])
                .collect();
            let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..2)).collect();
            let pts = Matrix::from_rows(&rows).unwrap();
            let idx = KnnIndex::new(&pts, labels.clone(), false);
            let k = rng.random_range(1..10);
            let class = if rng.random_bool(0.5) { Some(1) } else { None };
            for i in 0..50 {
                let mut all: Vec<(f64, usize)> = (0..50)
                    .filter(|&j| j != i && class.map_or(true, |c| labels[j] == c))
                    .map(|j| {
                        let d: f64 = (0..3).map(|f| (rows[i][f] - rows[j][f]).powi(2)).sum();
                        (d, j)
                    })
                    .collect();
                all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let expect: Vec<usize> = all.iter().take(k).map(|p| p.1).collect();
                match idx.query_member(i, k, class) {
                    Ok(got) => assert_eq!(got, expect),
                    Err(_) => assert!(all.len() < k),
                }
            }
        }
    }
}
