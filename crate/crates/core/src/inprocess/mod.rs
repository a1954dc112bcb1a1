//! Model-level mitigation: class-weighted training, balanced ensembles,
//! balanced epochs and the per-class meta-learner.

pub mod ensemble;
pub mod meta;

use rand::Rng;

use crate::dataset::{class_weights, Dataset};
use crate::error::{Error, Result};
use crate::learners::mlp::train_mlp_weighted;
use crate::learners::{Classifier, LearnerSpec, LossKind, LossSpec, MlpConfig, MlpModel};
use crate::seed::{Rng as SeedRng, Seed};

pub use ensemble::{
    bagging_fit, bagging_fit_with_seeds, boosting_fit, boosting_fit_traced, brf_fit, samme_alpha,
    BoostTrace, BoostingConfig, CombineRule, EnsembleModel,
};
pub use meta::{meta_fit, meta_predict, MetaConfig, MetaModel};

/// Trains `learner` with class weights `n / (C · n_i)`: as per-sample weights
/// for trees and forests, as the per-class α of the loss for the MLP (focal
/// losses keep their γ and become weighted focal).
pub fn weighted_fit(learner: &LearnerSpec, ds: &Dataset, seed: Seed) -> Result<Box<dyn Classifier>> {
    let cw = class_weights(ds)?;
    match learner {
        LearnerSpec::Mlp(cfg) => {
            let loss = match cfg.loss.kind {
                LossKind::Focal | LossKind::WeightedFocal => {
                    LossSpec::weighted_focal(cfg.loss.gamma, cw.weights.clone())
                }
                _ => LossSpec::weighted_ce(cw.weights.clone()),
            };
            Ok(Box::new(train_mlp_weighted(ds, cfg, &loss, None, seed, None)?))
        }
        _ => learner.fit(ds, Some(&cw.per_sample(ds.labels())), seed),
    }
}

fn balanced_size(ds: &Dataset) -> Result<(Vec<usize>, usize)> {
    let present = ds.present_classes();
    if present.len() < 2 {
        return Err(Error::TooFewClasses(present.len()));
    }
    let m = present.iter().map(|&c| ds.class_counts()[c]).min().unwrap_or(0);
    Ok((present, m))
}

/// Row indices of a balanced bootstrap: for every present class, in class
/// order, `min_count` draws with replacement from that class.
pub fn balanced_bootstrap_indices(ds: &Dataset, rng: &mut SeedRng) -> Result<Vec<usize>> {
    let (present, m) = balanced_size(ds)?;
    let mut out = Vec::with_capacity(m * present.len());
    for c in present {
        let members = ds.class_indices(c);
        for _ in 0..m {
            out.push(members[rng.random_range(0..members.len())]);
        }
    }
    Ok(out)
}

pub fn balanced_bootstrap(ds: &Dataset, seed: Seed) -> Result<Dataset> {
    Ok(ds.subset(&balanced_bootstrap_indices(ds, &mut seed.rng())?))
}

/// Rows used in epoch `epoch` of balanced epoch training.
pub fn epoch_subset(ds: &Dataset, seed: Seed, epoch: usize) -> Result<Vec<usize>> {
    balanced_bootstrap_indices(ds, &mut seed.derive_str("epoch").derive(epoch as u64).rng())
}

/// MLP training where every epoch sees a fresh balanced bootstrap.
pub fn balanced_epoch_train(ds: &Dataset, cfg: &MlpConfig, seed: Seed) -> Result<MlpModel> {
    balanced_size(ds)?;
    let sampler = |e: usize| epoch_subset(ds, seed, e).expect("checked above");
    train_mlp_weighted(ds, cfg, &cfg.loss, None, seed, Some(&sampler))
}
