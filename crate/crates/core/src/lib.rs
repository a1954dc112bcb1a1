//! Class-imbalance mitigation toolkit.
//!
//! The crate is organised by where a technique intervenes:
//!
//! * [`preprocess`] rewrites the training data (over/under-sampling, label
//!   flipping, a conditional VAE sampler);
//! * [`inprocess`] changes how a model learns (class weights, balanced
//!   ensembles, balanced epochs, a per-class meta-learner);
//! * [`postprocess`] reinterprets a trained model's probabilities
//!   (threshold tuning, cost thresholds, reweighting, isotonic calibration,
//!   and sample-weighted retraining).
//!
//! [`learners`] holds the from-scratch base models they all share, [`datagen`]
//! builds synthetic telemetry analogs with a controlled class separability,
//! and [`harness`] runs the repeated benchmark matrix and writes reports.

pub mod dataset;
pub mod datagen;
pub mod error;
pub mod fdr;
pub mod harness;
pub mod inprocess;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod pca;
pub mod postprocess;
pub mod preprocess;
pub mod seed;
pub mod split;

pub use dataset::{class_weights, ClassWeights, Dataset, Standardizer};
pub use error::{Error, Result};
pub use fdr::{compute_fdr, FdrScore};
pub use matrix::Matrix;
pub use metrics::{confusion_and_metrics, vmr, ConfusionMatrix, MetricsReport};
pub use pca::{pca_2d, Pca2d};
pub use seed::Seed;
pub use split::{stratified_split, three_way_split};
