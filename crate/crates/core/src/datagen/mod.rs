//! Synthetic telemetry analogs: per-class Gaussian mixtures whose class
//! separation is tuned to a target FDR, plus CSV ingestion.

mod csv_io;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fdr::compute_fdr;
use crate::matrix::Matrix;
use crate::metrics::largest_remainder;
use crate::seed::Seed;

pub use csv_io::{load_csv, save_csv, CsvSchema, LoadedCsv};

/// Lower and upper bound of the separation scale searched by calibration.
pub const SCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const MAX_CALIBRATION_STEPS: usize = 60;

/// A diagonal Gaussian with its share of the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub weight: f64,
}

impl Component {
    pub fn isotropic(mean: Vec<f64>, sd: f64) -> Self {
        let d = mean.len();
        Component {
            mean,
            variance: vec![sd * sd; d],
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub count: usize,
    pub components: Vec<Component>,
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_separation() -> f64 {
    1.0
}

fn default_names() -> Vec<String> {
    vec!["BER".into(), "OSNR".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub id: String,
    pub classes: Vec<ClassSpec>,
    #[serde(default = "default_names")]
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub target_fdr: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub fdr_tolerance: f64,
    /// Scale applied to every component mean about the count-weighted center.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GenSpec {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.count).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let d = self.n_features();
        if d == 0 {
            return bad("no features".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad(format!("separation {} must be positive", self.separation));
        }
        if !(self.fdr_tolerance > 0.0) {
            return bad("fdr_tolerance must be positive".into());
        }
        if let Some(t) = self.target_fdr {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("target_fdr {t} must be positive"));
            }
        }
        for (k, c) in self.classes.iter().enumerate() {
            if c.count == 0 {
                return bad(format!("class {k} has count 0"));
            }
            if c.components.is_empty() {
                return bad(format!("class {k} has no components"));
            }
            let mut total = 0.0;
            for comp in &c.components {
                if comp.mean.len() != d || comp.variance.len() != d {
                    return bad(format!("class {k}: component width differs from {d} features"));
                }
                if comp.mean.iter().any(|m| !m.is_finite())
                    || comp.variance.iter().any(|&v| !(v > 0.0 && v.is_finite()))
                {
                    return bad(format!("class {k}: variances must be positive and finite"));
                }
                if !(comp.weight >= 0.0) {
                    return bad(format!("class {k}: negative mixture weight"));
                }
                total += comp.weight;
            }
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!("class {k}: mixture weights sum to {total}"));
            }
        }
        Ok(())
    }

    fn component_counts(&self) -> Vec<Vec<usize>> {
        self.classes
            .iter()
            .map(|c| {
                let w: Vec<f64> = c.components.iter().map(|m| m.weight).collect();
                largest_remainder(&w, c.count)
            })
            .collect()
    }

    /// Count-weighted mean of the unscaled component means.
    pub fn center(&self) -> Vec<f64> {
        let d = self.n_features();
        let mut center = vec![0.0; d];
        let mut n = 0usize;
        for (c, counts) in self.classes.iter().zip(self.component_counts()) {
            for (comp, m) in c.components.iter().zip(counts) {
                for j in 0..d {
                    center[j] += m as f64 * comp.mean[j];
                }
                n += m;
            }
        }
        center.iter_mut().for_each(|v| *v /= n as f64);
        center
    }

    pub fn with_separation(&self, s: f64) -> GenSpec {
        GenSpec {
            separation: s,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> GenSpec {
        GenSpec {
            seed,
            ..self.clone()
        }
    }
}

/// Draws every class from its mixture. Component sizes follow the weights by
/// largest remainder, so class and component counts are exact.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.n_features();
    let center = spec.center();
    let s = spec.separation;
    let n: usize = spec.counts().iter().sum();
    let mut rng = Seed(spec.seed).rng();
    let mut x = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut i = 0;
    for (k, (c, counts)) in spec.classes.iter().zip(spec.component_counts()).enumerate() {
        for (comp, m) in c.components.iter().zip(counts) {
            let mean: Vec<f64> = (0..d).map(|j| center[j] + s * (comp.mean[j] - center[j])).collect();
            let sd: Vec<f64> = comp.variance.iter().map(|v| v.sqrt()).collect();
            for _ in 0..m {
                let row = x.row_mut(i);
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    row[j] = mean[j] + sd[j] * z;
                }
                labels.push(k);
                i += 1;
            }
        }
    }
    Dataset::new(x, labels, spec.n_classes())
}

fn measured_fdr(spec: &GenSpec, s: f64) -> Result<f64> {
    Ok(compute_fdr(&generate(&spec.with_separation(s))?)?.mean)
}

/// Bisects the separation scale (geometrically, within [`SCALE_BOUNDS`]) until
/// the generated data's FDR is within tolerance of `target_fdr`. The search
/// aims for a tenth of the tolerance so that a fresh seed stays inside it.
pub fn calibrate_to_fdr(spec: &GenSpec) -> Result<GenSpec> {
    spec.validate()?;
    let target = spec
        .target_fdr
        .ok_or_else(|| Error::InvalidSpec("calibration needs target_fdr".into()))?;
    if spec.n_classes() < 2 {
        return Err(Error::InvalidSpec("calibration needs ≥ 2 classes".into()));
    }
    let (mut lo, mut hi) = SCALE_BOUNDS;
    let f_lo = measured_fdr(spec, lo)?;
    let f_hi = measured_fdr(spec, hi)?;
    let fail = || Error::CalibrationFailed {
        target,
        low: f_lo,
        high: f_hi,
    };
    if target < f_lo - spec.fdr_tolerance || target > f_hi + spec.fdr_tolerance {
        return Err(fail());
    }
    let mut best = (f64::INFINITY, spec.separation);
    for _ in 0..MAX_CALIBRATION_STEPS {
        let mid = (lo * hi).sqrt();
        let f = measured_fdr(spec, mid)?;
        if (f - target).abs() < best.0 {
            best = ((f - target).abs(), mid);
        }
        if (f - target).abs() <= 0.1 * spec.fdr_tolerance {
            break;
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > spec.fdr_tolerance {
        return Err(fail());
    }
    Ok(spec.with_separation(best.1))
}

fn two_d(x: f64, y: f64) -> Vec<f64> {
    vec![x, y]
}

/// Heavily overlapping binary analog: the failure class sits on a small
/// satellite of the normal class. Target FDR 0.769.
pub fn detection_analog(seed: u64) -> GenSpec {
    GenSpec {
        id: "detection".into(),
        classes: vec![
            ClassSpec {
                count: 7859,
                components: vec![
                    Component::isotropic(two_d(0.0, 0.0), 1.0).with_weight(0.981),
                    Component::isotropic(two_d(10.0, 10.0), 1.0).with_weight(0.019),
                ],
            },
            ClassSpec {
                count: 194,
                components: vec![Component::isotropic(two_d(10.0, 10.0), 1.0)],
            },
        ],
        feature_names: default_names(),
        target_fdr: Some(0.769),
        fdr_tolerance: 0.05,
        separation: 1.0,
        seed,
    }
}

/// Binary analog whose failure class is a tight, isolated cluster. Target
/// FDR 2.254.
pub fn soft_failure_analog(seed: u64) -> GenSpec {
    GenSpec {
        id: "soft_failure".into(),
        classes: vec![
            ClassSpec {
                count: 6253,
                components: vec![Component::isotropic(two_d(0.0, 0.0), 1.0)],
            },
            ClassSpec {
                count: 714,
                components: vec![Component::isotropic(two_d(5.0, 5.0), 0.3)],
            },
        ],
        feature_names: default_names(),
        target_fdr: Some(2.254),
        fdr_tolerance: 0.05,
        separation: 1.0,
        seed,
    }
}

/// Six failure types: 0, 3 and 5 far apart, 1, 2 and 4 crowded together.
/// Target FDR 181.2.
pub fn identification_analog(seed: u64) -> GenSpec {
    let counts = [2184, 224, 152, 991, 254, 325];
    let means = [
        two_d(0.0, 0.0),
        two_d(20.0, 20.0),
        two_d(20.8, 20.0),
        two_d(40.0, 0.0),
        two_d(20.0, 20.8),
        two_d(0.0, 40.0),
    ];
    GenSpec {
        id: "identification".into(),
        classes: counts
            .iter()
            .zip(means)
            .map(|(&count, m)| ClassSpec {
                count,
                components: vec![Component::isotropic(m, 1.0)],
            })
            .collect(),
        feature_names: default_names(),
        target_fdr: Some(181.2),
        fdr_tolerance: 5.0,
        separation: 1.0,
        seed,
    }
}

pub fn preset(name: &str, seed: u64) -> Option<GenSpec> {
    match name {
        "detection" => Some(detection_analog(seed)),
        "soft_failure" => Some(soft_failure_analog(seed)),
        "identification" => Some(identification_analog(seed)),
        _ => None,
    }
}
