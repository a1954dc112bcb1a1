//! Per-class focused submodels stacked under a logistic meta-learner.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::{
    check_width, train_forest, train_logistic, Classifier, ForestConfig, ForestModel,
    LogisticConfig, LogisticModel,
};
use crate::matrix::Matrix;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    /// Other-class rows added to class `c`'s set, as a fraction of `n_c`.
    pub contamination: f64,
    pub forest: ForestConfig,
    pub logistic: LogisticConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            contamination: 0.10,
            forest: ForestConfig::default(),
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    /// One submodel per class, in class order.
    pub submodels: Vec<ForestModel>,
    pub meta: LogisticModel,
    /// Rows of the training set each submodel saw.
    pub focused_rows: Vec<Vec<usize>>,
}

impl MetaModel {
    pub fn meta_width(&self) -> usize {
        self.submodels.iter().map(|m| m.n_classes).sum()
    }

    /// Concatenated submodel probabilities.
    pub fn meta_features(&self, x: &Matrix) -> Result<Matrix> {
        let outs: Vec<Matrix> = self
            .submodels
            .iter()
            .map(|m| m.predict_proba(x))
            .collect::<Result<_>>()?;
        let mut z = Matrix::zeros(x.rows(), self.meta_width());
        for i in 0..x.rows() {
            let mut j = 0;
            for o in &outs {
                for &v in o.row(i) {
                    z.set(i, j, v);
                    j += 1;
                }
            }
        }
        Ok(z)
    }
}

impl Classifier for MetaModel {
    fn n_features(&self) -> usize {
        self.submodels[0].n_features
    }

    fn n_classes(&self) -> usize {
        self.meta.n_classes()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.n_features(), x)?;
        self.meta.predict_proba(&self.meta_features(x)?)
    }
}

/// Number of other-class rows mixed into a class of `n` rows.
pub fn contamination_count(n: usize, contamination: f64) -> usize {
    ((contamination * n as f64).floor() as usize).max(1)
}

pub fn meta_fit(ds: &Dataset, cfg: &MetaConfig, seed: Seed) -> Result<MetaModel> {
    if !(0.0..=1.0).contains(&cfg.contamination) {
        return Err(Error::InvalidParameter("contamination not in [0, 1]".into()));
    }
    let c = ds.n_classes();
    if ds.present_classes().len() < 2 {
        return Err(Error::TooFewClasses(ds.present_classes().len()));
    }
    for k in 0..c {
        let n = ds.class_counts()[k];
        if n < 2 {
            return Err(Error::TooFewSamples {
                class: k,
                count: n,
                needed: 2,
            });
        }
    }
    let mut submodels = Vec::with_capacity(c);
    let mut focused_rows = Vec::with_capacity(c);
    for k in 0..c {
        let own = ds.class_indices(k);
        let others: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels()[i] != k).collect();
        let m = contamination_count(own.len(), cfg.contamination).min(others.len());
        let mut rng = seed.derive(k as u64).derive(0).rng();
        let mut rows = own;
        rows.extend(index::sample(&mut rng, others.len(), m).iter().map(|j| others[j]));
        rows.sort_unstable();
        submodels.push(train_forest(&ds.subset(&rows), &cfg.forest, seed.derive(k as u64).derive(1))?);
        focused_rows.push(rows);
    }
    let mut model = MetaModel {
        submodels,
        meta: LogisticModel {
            weights: Matrix::zeros(c, 0),
            bias: vec![0.0; c],
            loss_history: Vec::new(),
        },
        focused_rows,
    };
    let z = model.meta_features(ds.features())?;
    model.meta = train_logistic(&z, ds.labels(), c, &cfg.logistic)?;
    Ok(model)
}

pub fn meta_predict(m: &MetaModel, features: &Matrix) -> Result<Vec<usize>> {
    m.predict(features)
}
