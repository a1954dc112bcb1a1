use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, resolve_weights, MaxFeatures, TreeConfig, TreeModel};
use super::{check_width, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

/// Random forest settings. The defaults are the baseline used throughout:
/// 100 unpruned Gini trees, √d candidate features per split, bootstrap on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            bootstrap: true,
            tree: TreeConfig {
                max_features: MaxFeatures::Sqrt,
                ..TreeConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<Seed>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl ForestModel {
    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Arithmetic mean of the member trees' leaf distributions.
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.n_features, x)?;
        let mut acc = Matrix::zeros(x.rows(), self.n_classes);
        for t in &self.trees {
            t.accumulate_proba(x, &mut acc);
        }
        let m = self.trees.len() as f64;
        for i in 0..acc.rows() {
            acc.row_mut(i).iter_mut().for_each(|v| *v /= m);
        }
        Ok(acc)
    }
}

pub fn train_forest(ds: &Dataset, cfg: &ForestConfig, seed: Seed) -> Result<ForestModel> {
    train_forest_weighted(ds, None, cfg, seed)
}

/// Each tree sees `n` bootstrap draws (as integer weights on top of
/// `sample_weights`) and its own seed derived from `(seed, tree index)`.
pub fn train_forest_weighted(
    ds: &Dataset,
    sample_weights: Option<&[f64]>,
    cfg: &ForestConfig,
    seed: Seed,
) -> Result<ForestModel> {
    let base = resolve_weights(ds, sample_weights)?;
    let n = ds.n_samples();
    let bootstrap = cfg.bootstrap;
    train_with_sampler(ds, cfg, seed, |rng| {
        let mut w = if bootstrap {
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
            counts
        } else {
            vec![1.0; n]
        };
        w.iter_mut().zip(&base).for_each(|(a, b)| *a *= b);
        w
    })
}

/// Generic forest trainer: `sampler` turns a per-tree RNG into per-row weights
/// (0 = row unused). Balanced forests plug in a class-balanced sampler here.
pub(crate) fn train_with_sampler<F>(
    ds: &Dataset,
    cfg: &ForestConfig,
    seed: Seed,
    sampler: F,
) -> Result<ForestModel>
where
    F: Fn(&mut crate::seed::Rng) -> Vec<f64> + Sync,
{
    if cfg.n_estimators == 0 {
        return Err(Error::InvalidParameter("n_estimators must be ≥ 1".into()));
    }
    let tree_seeds: Vec<Seed> = (0..cfg.n_estimators as u64).map(|t| seed.derive(t)).collect();
    let trees: Vec<TreeModel> = tree_seeds
        .par_iter()
        .map(|&ts| {
            let mut rng = ts.derive(0).rng();
            let w = sampler(&mut rng);
            let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| w[i] > 0.0).collect();
            grow(ds, &w, rows, &cfg.tree, ts.derive(1))
        })
        .collect::<Result<_>>()?;
    Ok(ForestModel {
        trees,
        tree_seeds,
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::train_tree;
    use rand_distr::StandardNormal;

    fn blobs(n_per: usize, sep: f64, seed: u64) -> Dataset {
        let mut rng = Seed(seed).rng();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n_per {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                rows.push([a + sep * c as f64, b + sep * c as f64]);
                labels.push(c);
            }
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn single_unbootstrapped_tree_matches_train_tree() {
        let ds = blobs(60, 1.0, 1);
        let cfg = ForestConfig {
            n_estimators: 1,
            bootstrap: false,
            tree: TreeConfig::default(),
        };
        let f = train_forest(&ds, &cfg, Seed(4)).unwrap();
        let t = train_tree(&ds, None, &TreeConfig::default(), Seed(99)).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn separated_blobs_classified_perfectly() {
        for s in 0..10 {
            let train = blobs(50, 10.0, 100 + s);
            let test = blobs(50, 10.0, 200 + s);
            let cfg = ForestConfig {
                n_estimators: 20,
                ..Default::default()
            };
            let f = train_forest(&train, &cfg, Seed(s)).unwrap();
            assert_eq!(f.predict(test.features()).unwrap(), test.labels());
        }
    }

    #[test]
    fn deterministic_and_mean_of_trees() {
        let ds = blobs(80, 1.5, 3);
        let cfg = ForestConfig {
            n_estimators: 15,
            ..Default::default()
        };
        let a = train_forest(&ds, &cfg, Seed(7)).unwrap();
        let b = train_forest(&ds, &cfg, Seed(7)).unwrap();
        assert_eq!(a, b);
        let p = a.predict_proba(ds.features()).unwrap();
        for i in 0..ds.n_samples() {
            for c in 0..2 {
                let mut s = 0.0;
                for t in &a.trees {
                    s += t.leaf_for(ds.row(i))[c];
                }
                assert_eq!(p.get(i, c), s / 15.0);
            }
        }
    }

    #[test]
    fn identical_single_leaf_trees_give_constant_rows() {
        let rows = vec![[0.0], [1.0], [2.0]];
        let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), vec![1, 1, 1], 2).unwrap();
        let f = train_forest(&ds, &ForestConfig::default(), Seed(0)).unwrap();
        let p = f.predict_proba(&Matrix::from_rows(&[[5.0], [-3.0]]).unwrap()).unwrap();
        assert_eq!(p.row(0), &[0.0, 1.0]);
        assert_eq!(p.row(1), &[0.0, 1.0]);
    }
}
