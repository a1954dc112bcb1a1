//! Data-level mitigation: resampling, cleaning, label flipping and a
//! conditional VAE sampler.
//!
//! Every method is a pure `(Dataset, spec, Seed) -> Dataset` function. Rows of
//! classes a method does not touch are copied through unchanged and in order;
//! new rows are appended per class in ascending class order.

pub mod cvae;
pub mod flipping;
pub mod sampling;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::Seed;

pub use cvae::{cvae_fit, cvae_sample, CvaeConfig, CvaeModel};
pub use flipping::{cluster_massaging, massaging, massaging_probe, perturbation};
pub use sampling::{
    adasyn, adasyn_hardness, cluster_centroids, find_tomek_links, ros, rus, smote, smote_tomek, smote_with_lambda,
    TomekPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Ros,
    Smote,
    Adasyn,
    Rus,
    ClusterCentroids,
    SmoteTomek,
    Massaging,
    Perturbation,
    ClusterMassaging,
    Cvae,
}

impl ResampleMethod {
    fn undersamples(self) -> bool {
        matches!(self, ResampleMethod::Rus | ResampleMethod::ClusterCentroids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Balance {
    BalanceToMajority,
    BalanceToMinority,
}

/// Desired per-class counts after resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum TargetCounts {
    Balance(Balance),
    /// Classes not listed keep their count.
    Explicit(BTreeMap<usize, usize>),
}

// JSON object keys are strings, so explicit maps go through this form.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Balance(Balance),
    Explicit(BTreeMap<String, usize>),
}

impl TryFrom<TargetRepr> for TargetCounts {
    type Error = String;

    fn try_from(r: TargetRepr) -> std::result::Result<Self, String> {
        Ok(match r {
            TargetRepr::Balance(b) => TargetCounts::Balance(b),
            TargetRepr::Explicit(m) => TargetCounts::Explicit(
                m.into_iter()
                    .map(|(k, v)| {
                        k.parse::<usize>()
                            .map(|k| (k, v))
                            .map_err(|_| format!("class id {k:?} is not an integer"))
                    })
                    .collect::<std::result::Result<_, _>>()?,
            ),
        })
    }
}

impl From<TargetCounts> for TargetRepr {
    fn from(t: TargetCounts) -> Self {
        match t {
            TargetCounts::Balance(b) => TargetRepr::Balance(b),
            TargetCounts::Explicit(m) => {
                TargetRepr::Explicit(m.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
            }
        }
    }
}

impl TargetCounts {
    pub const MAJORITY: TargetCounts = TargetCounts::Balance(Balance::BalanceToMajority);
    pub const MINORITY: TargetCounts = TargetCounts::Balance(Balance::BalanceToMinority);

    /// One target per class; absent classes stay at 0 under the balance modes.
    pub fn resolve(&self, ds: &Dataset) -> Vec<usize> {
        let counts = ds.class_counts();
        let present = ds.present_classes();
        match self {
            TargetCounts::Balance(b) => {
                let pick = match b {
                    Balance::BalanceToMajority => present.iter().map(|&c| counts[c]).max(),
                    Balance::BalanceToMinority => present.iter().map(|&c| counts[c]).min(),
                }
                .unwrap_or(0);
                counts
                    .iter()
                    .map(|&n| if n > 0 { pick } else { 0 })
                    .collect()
            }
            TargetCounts::Explicit(map) => (0..ds.n_classes())
                .map(|c| map.get(&c).copied().unwrap_or(counts[c]))
                .collect(),
        }
    }
}

/// Ordered pair for label flipping: rows move `from` → `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipPair {
    pub from: usize,
    pub to: usize,
}

impl FlipPair {
    /// Majority → minority of `ds`.
    pub fn of(ds: &Dataset) -> Self {
        FlipPair {
            from: ds.majority_class(),
            to: ds.minority_class(),
        }
    }

    fn check(self, ds: &Dataset) -> Result<()> {
        for c in [self.from, self.to] {
            if c >= ds.n_classes() || ds.class_counts()[c] == 0 {
                return Err(Error::MissingClass(c));
            }
        }
        if self.from == self.to {
            return Err(Error::InvalidParameter("flip pair needs two classes".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_CLUSTER_MASSAGING_CLUSTERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    /// `None` balances to the majority for oversamplers and to the minority
    /// for undersamplers.
    pub target: Option<TargetCounts>,
    pub p_majority_flip: f64,
    pub p_minority_flip: f64,
    pub flip_fraction: f64,
    /// Cluster count for cluster centroids (default: the target count) and
    /// cluster massaging (default 5).
    pub n_clusters: Option<usize>,
    /// Flip direction; defaults to majority → minority.
    pub flip_pair: Option<FlipPair>,
    pub cvae: CvaeConfig,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        ResampleSpec::new(ResampleMethod::Ros)
    }
}

impl ResampleSpec {
    pub fn new(method: ResampleMethod) -> Self {
        ResampleSpec {
            method,
            k_neighbors: 5,
            target: None,
            p_majority_flip: 0.1,
            p_minority_flip: 0.0,
            flip_fraction: 0.2,
            n_clusters: None,
            flip_pair: None,
            cvae: CvaeConfig::default(),
        }
    }

    pub fn with_target(mut self, t: TargetCounts) -> Self {
        self.target = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter("k_neighbors must be ≥ 1".into()));
        }
        for (name, p) in [
            ("p_majority_flip", self.p_majority_flip),
            ("p_minority_flip", self.p_minority_flip),
            ("flip_fraction", self.flip_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} not in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn targets(&self, ds: &Dataset) -> Vec<usize> {
        let default = if self.method.undersamples() {
            TargetCounts::MINORITY
        } else {
            TargetCounts::MAJORITY
        };
        self.target.as_ref().unwrap_or(&default).resolve(ds)
    }

    pub fn pair(&self, ds: &Dataset) -> FlipPair {
        self.flip_pair.unwrap_or_else(|| FlipPair::of(ds))
    }
}

/// Runs the method named in `spec`.
pub fn resample(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    spec.validate()?;
    match spec.method {
        ResampleMethod::Ros => ros(ds, spec, seed),
        ResampleMethod::Smote => smote(ds, spec, seed),
        ResampleMethod::Adasyn => adasyn(ds, spec, seed),
        ResampleMethod::Rus => rus(ds, spec, seed),
        ResampleMethod::ClusterCentroids => cluster_centroids(ds, spec, seed),
        ResampleMethod::SmoteTomek => smote_tomek(ds, spec, seed),
        ResampleMethod::Massaging => {
            flipping::massaging_pair(ds, spec.pair(ds), spec.flip_fraction, seed)
        }
        ResampleMethod::Perturbation => flipping::perturbation_pair(
            ds,
            spec.pair(ds),
            spec.p_majority_flip,
            spec.p_minority_flip,
            seed,
        ),
        ResampleMethod::ClusterMassaging => flipping::cluster_massaging_pair(
            ds,
            spec.pair(ds),
            spec.n_clusters.unwrap_or(DEFAULT_CLUSTER_MASSAGING_CLUSTERS),
            spec.flip_fraction,
            seed,
        ),
        ResampleMethod::Cvae => cvae::cvae_oversample(ds, spec, seed),
    }
}
