//! Technique registry: every id accepted in a benchmark config and the
//! pipeline it runs.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{class_weights, ClassWeights, Dataset};
use crate::error::{Error, Result};
use crate::inprocess::{
    bagging_fit, balanced_epoch_train, boosting_fit, brf_fit, meta_fit, weighted_fit,
    BoostingConfig, MetaConfig,
};
use crate::learners::{Classifier, LearnerSpec, LossSpec, MlpConfig, TreeConfig};
use crate::matrix::Matrix;
use crate::metrics::f1_for_class;
use crate::postprocess::{
    cost_threshold, reweight_predictions, sample_weighting, tune_threshold_for,
    tune_thresholds_ovr, CostSpec, IsotonicCalibrator, ThresholdRule,
    DEFAULT_MISCLASSIFIED_FACTOR,
};
use crate::preprocess::{resample, ResampleMethod, ResampleSpec};
use crate::seed::Seed;

/// Ids accepted in the `kind` field of a technique entry.
pub const TECHNIQUE_KINDS: &[&str] = &[
    "baseline",
    "ros",
    "smote",
    "adasyn",
    "rus",
    "cluster_centroids",
    "smote_tomek",
    "massaging",
    "perturbation",
    "cluster_massaging",
    "cvae",
    "class_weighting",
    "focal_loss",
    "weighted_focal_loss",
    "bagging",
    "boosting",
    "brf",
    "balanced_epochs",
    "meta_learning",
    "threshold_adjustment",
    "cost_threshold",
    "reweighting",
    "isotonic_calibration",
    "sample_weighting",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Technique {
    Baseline,
    Resample(ResampleSpec),
    ClassWeighting,
    FocalLoss { gamma: f64 },
    WeightedFocalLoss { gamma: f64 },
    Bagging { n_estimators: usize, base: LearnerSpec },
    Boosting(BoostingConfig),
    Brf { n_trees: usize },
    BalancedEpochs,
    MetaLearning(MetaConfig),
    ThresholdAdjustment { delta: f64 },
    CostThreshold(CostSpec),
    /// `None` tunes the scale on the tuning split.
    Reweighting { scale: Option<f64> },
    IsotonicCalibration,
    SampleWeighting { factor: f64 },
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GammaParams {
    gamma: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        GammaParams { gamma: 2.0 }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BaggingParams {
    n_estimators: usize,
    base: LearnerSpec,
}

impl Default for BaggingParams {
    fn default() -> Self {
        BaggingParams {
            n_estimators: 10,
            base: LearnerSpec::Tree(TreeConfig::default()),
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BrfParams {
    n_trees: usize,
}

impl Default for BrfParams {
    fn default() -> Self {
        BrfParams { n_trees: 100 }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DeltaParams {
    delta: f64,
}

impl Default for DeltaParams {
    fn default() -> Self {
        DeltaParams { delta: 0.01 }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CostParams {
    c_fp: f64,
    c_fn: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { c_fp: 1.0, c_fn: 4.0 }
    }
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ScaleParams {
    scale: Option<f64>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FactorParams {
    factor: f64,
}

impl Default for FactorParams {
    fn default() -> Self {
        FactorParams {
            factor: DEFAULT_MISCLASSIFIED_FACTOR,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn params<T: DeserializeOwned>(kind: &str, rest: Value) -> Result<T> {
    serde_json::from_value(rest).map_err(|e| Error::Config(format!("technique {kind}: {e}")))
}

fn resample_method(kind: &str) -> Option<ResampleMethod> {
    serde_json::from_value(Value::String(kind.into())).ok()
}

/// A technique entry with the id it is reported under.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueConfig {
    pub id: String,
    pub kind: String,
    pub technique: Technique,
}

impl TechniqueConfig {
    pub fn baseline() -> Self {
        TechniqueConfig {
            id: "baseline".into(),
            kind: "baseline".into(),
            technique: Technique::Baseline,
        }
    }

    /// Accepts `"rus"` or `{"kind": "smote", "id": "smote_k3", "k_neighbors": 3}`.
    pub fn from_value(v: &Value) -> Result<Self> {
        let mut obj = match v {
            Value::String(s) => serde_json::Map::from_iter([("kind".to_string(), Value::String(s.clone()))]),
            Value::Object(m) => m.clone(),
            _ => return Err(Error::Config(format!("technique entry {v} is not a string or object"))),
        };
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            _ => return Err(Error::Config(format!("technique entry {v} has no kind"))),
        };
        if !TECHNIQUE_KINDS.contains(&kind.as_str()) {
            return Err(Error::UnknownTechnique(kind));
        }
        let id = match obj.remove("id") {
            Some(Value::String(s)) => s,
            None => kind.clone(),
            Some(other) => return Err(Error::Config(format!("technique id {other} is not a string"))),
        };
        let rest = Value::Object(obj);
        let k = kind.as_str();
        let technique = match k {
            "baseline" => {
                params::<NoParams>(k, rest)?;
                Technique::Baseline
            }
            "class_weighting" | "balanced_epochs" | "isotonic_calibration" => {
                params::<NoParams>(k, rest)?;
                match k {
                    "class_weighting" => Technique::ClassWeighting,
                    "balanced_epochs" => Technique::BalancedEpochs,
                    _ => Technique::IsotonicCalibration,
                }
            }
            "focal_loss" => Technique::FocalLoss {
                gamma: params::<GammaParams>(k, rest)?.gamma,
            },
            "weighted_focal_loss" => Technique::WeightedFocalLoss {
                gamma: params::<GammaParams>(k, rest)?.gamma,
            },
            "bagging" => {
                let p: BaggingParams = params(k, rest)?;
                Technique::Bagging {
                    n_estimators: p.n_estimators,
                    base: p.base,
                }
            }
            "boosting" => Technique::Boosting(params(k, rest)?),
            "brf" => Technique::Brf {
                n_trees: params::<BrfParams>(k, rest)?.n_trees,
            },
            "meta_learning" => Technique::MetaLearning(params(k, rest)?),
            "threshold_adjustment" => Technique::ThresholdAdjustment {
                delta: params::<DeltaParams>(k, rest)?.delta,
            },
            "cost_threshold" => {
                let p: CostParams = params(k, rest)?;
                let costs = CostSpec {
                    c_fp: p.c_fp,
                    c_fn: p.c_fn,
                };
                cost_threshold(costs)?;
                Technique::CostThreshold(costs)
            }
            "reweighting" => Technique::Reweighting {
                scale: params::<ScaleParams>(k, rest)?.scale,
            },
            "sample_weighting" => Technique::SampleWeighting {
                factor: params::<FactorParams>(k, rest)?.factor,
            },
            _ => {
                let method = resample_method(k).ok_or_else(|| Error::UnknownTechnique(kind.clone()))?;
                let mut obj = match rest {
                    Value::Object(m) => m,
                    _ => unreachable!(),
                };
                obj.insert("method".into(), Value::String(kind.clone()));
                let spec: ResampleSpec = params(k, Value::Object(obj))?;
                debug_assert_eq!(spec.method, method);
                spec.validate()?;
                Technique::Resample(spec)
            }
        };
        Ok(TechniqueConfig { id, kind, technique })
    }
}

impl Serialize for TechniqueConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = serde_json::Map::new();
        m.insert("kind".into(), Value::String(self.kind.clone()));
        if self.id != self.kind {
            m.insert("id".into(), Value::String(self.id.clone()));
        }
        Value::Object(m).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TechniqueConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        TechniqueConfig::from_value(&v).map_err(serde::de::Error::custom)
    }
}

/// How a trained pipeline turns test features into labels.
pub enum Fitted {
    Plain(Box<dyn Classifier>),
    Threshold(Box<dyn Classifier>, ThresholdRule),
    Reweighted(Box<dyn Classifier>, ClassWeights, f64),
    Calibrated(Box<dyn Classifier>, IsotonicCalibrator),
}

impl Fitted {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            Fitted::Plain(m) => m.predict(x),
            Fitted::Threshold(m, rule) => rule.decide(&m.predict_proba(x)?),
            Fitted::Reweighted(m, w, s) => Ok(reweight_predictions(&m.predict_proba(x)?, w, *s)?.argmax_rows()),
            Fitted::Calibrated(m, cal) => Ok(cal.apply(&m.predict_proba(x)?)?.argmax_rows()),
        }
    }
}

/// What the score of a run is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    /// F1 of one class.
    Class(usize),
    Macro,
    Weighted,
}

impl Scoring {
    pub fn score(self, y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
        match self {
            Scoring::Class(c) => Ok(f1_for_class(y_true, y_pred, c)),
            Scoring::Macro | Scoring::Weighted => {
                let (_, r) = crate::metrics::confusion_and_metrics(y_true, y_pred, n_classes)?;
                Ok(if self == Scoring::Macro { r.macro_f1 } else { r.weighted_f1 })
            }
        }
    }
}

fn mlp_only<'a>(learner: &'a LearnerSpec, kind: &str) -> Result<&'a MlpConfig> {
    match learner {
        LearnerSpec::Mlp(c) => Ok(c),
        _ => Err(Error::InvalidParameter(format!("{kind} needs an MLP learner"))),
    }
}

/// Reweighting scale grid searched when none is configured.
pub fn reweight_scale_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

pub struct PipelineSeeds {
    /// Seed of the base learner, shared with the baseline of the same repetition.
    pub model: Seed,
    /// Technique-specific randomness.
    pub technique: Seed,
}

/// Trains `technique` on `train`, tuning post-processors on `tune`.
pub fn fit_pipeline(
    technique: &Technique,
    learner: &LearnerSpec,
    train: &Dataset,
    tune: &Dataset,
    scoring: Scoring,
    seeds: &PipelineSeeds,
) -> Result<Fitted> {
    let base = || learner.fit(train, None, seeds.model);
    Ok(match technique {
        Technique::Baseline => Fitted::Plain(base()?),
        Technique::Resample(spec) => {
            let ds = resample(train, spec, seeds.technique)?;
            Fitted::Plain(learner.fit(&ds, None, seeds.model)?)
        }
        Technique::ClassWeighting => Fitted::Plain(weighted_fit(learner, train, seeds.model)?),
        Technique::FocalLoss { gamma } => {
            let mut cfg = mlp_only(learner, "focal_loss")?.clone();
            cfg.loss = LossSpec::focal(*gamma);
            Fitted::Plain(LearnerSpec::Mlp(cfg).fit(train, None, seeds.model)?)
        }
        Technique::WeightedFocalLoss { gamma } => {
            let mut cfg = mlp_only(learner, "weighted_focal_loss")?.clone();
            cfg.loss = LossSpec::focal(*gamma);
            Fitted::Plain(weighted_fit(&LearnerSpec::Mlp(cfg), train, seeds.model)?)
        }
        Technique::Bagging { n_estimators, base } => {
            Fitted::Plain(Box::new(bagging_fit(train, base, *n_estimators, seeds.technique)?))
        }
        Technique::Boosting(cfg) => Fitted::Plain(Box::new(boosting_fit(train, cfg, seeds.technique)?)),
        Technique::Brf { n_trees } => Fitted::Plain(Box::new(brf_fit(train, *n_trees, seeds.technique)?)),
        Technique::BalancedEpochs => {
            let cfg = mlp_only(learner, "balanced_epochs")?;
            Fitted::Plain(Box::new(balanced_epoch_train(train, cfg, seeds.model)?))
        }
        Technique::MetaLearning(cfg) => Fitted::Plain(Box::new(meta_fit(train, cfg, seeds.technique)?)),
        Technique::ThresholdAdjustment { delta } => {
            let m = base()?;
            let p = m.predict_proba(tune.features())?;
            let rule = match scoring {
                Scoring::Class(c) if train.n_classes() == 2 => {
                    tune_threshold_for(&p.column(c), tune.labels(), c, *delta)?.0
                }
                _ => tune_thresholds_ovr(&p, tune.labels(), *delta)?,
            };
            Fitted::Threshold(m, rule)
        }
        Technique::CostThreshold(costs) => {
            let tau = cost_threshold(*costs)?;
            let rule = match scoring {
                Scoring::Class(c) if train.n_classes() == 2 => ThresholdRule::binary(tau, c),
                _ => ThresholdRule::ratio(vec![tau; train.n_classes()]),
            };
            Fitted::Threshold(base()?, rule)
        }
        Technique::Reweighting { scale } => {
            let m = base()?;
            let w = class_weights(train)?;
            let s = match scale {
                Some(s) => *s,
                None => {
                    let p = m.predict_proba(tune.features())?;
                    let mut best = (0.0, f64::NEG_INFINITY);
                    for s in reweight_scale_grid() {
                        let pred = reweight_predictions(&p, &w, s)?.argmax_rows();
                        let f = scoring.score(tune.labels(), &pred, tune.n_classes())?;
                        if f > best.1 {
                            best = (s, f);
                        }
                    }
                    best.0
                }
            };
            Fitted::Reweighted(m, w, s)
        }
        Technique::IsotonicCalibration => {
            let m = base()?;
            let cal = IsotonicCalibrator::fit(&m.predict_proba(tune.features())?, tune.labels())?;
            Fitted::Calibrated(m, cal)
        }
        Technique::SampleWeighting { factor } => {
            Fitted::Plain(sample_weighting(train, learner, *factor, seeds.model)?.model)
        }
    })
}
