//! From-scratch base learners shared by every mitigation family.

pub mod forest;
pub mod kmeans;
pub mod knn;
pub mod logistic;
pub mod loss;
pub mod mlp;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

pub use forest::{train_forest, ForestConfig, ForestModel};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansModel};
pub use knn::KnnIndex;
pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use loss::{focal_loss, LossKind, LossSpec};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
pub use tree::{train_tree, MaxFeatures, TreeConfig, TreeModel};

/// Uniform prediction surface used by ensembles, post-processors and the
/// benchmark runner.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// One row per sample, each summing to 1.
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;

    /// Hard labels; defaults to the row argmax (lowest class on ties).
    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.argmax_rows())
    }
}

pub(crate) fn check_width(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: x.cols(),
        });
    }
    Ok(())
}

/// Declarative choice of base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Tree(TreeConfig),
    Forest(ForestConfig),
    Mlp(MlpConfig),
}

impl LearnerSpec {
    pub fn default_forest() -> Self {
        LearnerSpec::Forest(ForestConfig::default())
    }

    pub fn default_mlp() -> Self {
        LearnerSpec::Mlp(MlpConfig::default())
    }

    pub fn fit(
        &self,
        ds: &Dataset,
        sample_weights: Option<&[f64]>,
        seed: Seed,
    ) -> Result<Box<dyn Classifier>> {
        Ok(match self {
            LearnerSpec::Tree(cfg) => Box::new(train_tree(ds, sample_weights, cfg, seed)?),
            LearnerSpec::Forest(cfg) => {
                Box::new(forest::train_forest_weighted(ds, sample_weights, cfg, seed)?)
            }
            LearnerSpec::Mlp(cfg) => Box::new(mlp::train_mlp_weighted(
                ds,
                cfg,
                &cfg.loss,
                sample_weights,
                seed,
                None,
            )?),
        })
    }
}

impl Classifier for Box<dyn Classifier> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        (**self).predict_proba(x)
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        (**self).predict(x)
    }
}
