//! Repeated benchmark over datasets × techniques with paired seeds, plus CSV,
//! JSON and SVG reporting.

mod charts;
mod report;
pub mod technique;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{calibrate_to_fdr, generate, load_csv, preset, CsvSchema, GenSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::metrics::{mean, median, vmr};
use crate::seed::Seed;
use crate::split::three_way_split;

pub use charts::{emit_charts, f1_chart_svg, improvement_chart_svg};
pub use report::{emit_report, fmt_sig6, read_rows_csv, read_rows_json, round_sig6, write_outputs, ReportFormat};
pub use technique::{fit_pipeline, Fitted, PipelineSeeds, Scoring, Technique, TechniqueConfig, TECHNIQUE_KINDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Minority-class F1 for two classes, macro-F1 otherwise.
    #[default]
    Auto,
    Binary,
    Macro,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    #[default]
    Wall,
    /// Report every time as 0 so that outputs depend only on the seed.
    Off,
}

fn default_learner() -> LearnerSpec {
    LearnerSpec::default_forest()
}

fn yes() -> bool {
    true
}

/// One dataset: a generator preset, an inline generator spec or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GenSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<CsvSchema>,
    /// Generator seed for presets.
    #[serde(default)]
    pub data_seed: u64,
    /// Calibrate generated data to the generator's target FDR when one is set.
    #[serde(default = "yes")]
    pub calibrate: bool,
    #[serde(default = "default_learner")]
    pub learner: LearnerSpec,
    /// Class scored under binary averaging; defaults to the minority class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<usize>,
}

impl DatasetConfig {
    pub fn from_preset(id: &str, preset: &str, learner: LearnerSpec) -> Self {
        DatasetConfig {
            id: id.into(),
            preset: Some(preset.into()),
            spec: None,
            csv: None,
            schema: None,
            data_seed: 0,
            calibrate: true,
            learner,
            positive_class: None,
        }
    }

    fn gen_spec(&self) -> Result<Option<GenSpec>> {
        let spec = match (&self.preset, &self.spec) {
            (Some(p), None) => preset(p, self.data_seed)
                .ok_or_else(|| Error::Config(format!("dataset {}: unknown preset {p:?}", self.id)))?,
            (None, Some(s)) => s.clone(),
            (None, None) => return Ok(None),
            _ => return Err(Error::Config(format!("dataset {}: give one of preset, spec, csv", self.id))),
        };
        Ok(Some(spec))
    }

    fn check(&self) -> Result<()> {
        let sources = [self.preset.is_some(), self.spec.is_some(), self.csv.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::Config(format!("dataset {}: give exactly one of preset, spec, csv", self.id)));
        }
        if self.csv.is_some() && self.schema.is_none() {
            return Err(Error::Config(format!("dataset {}: csv needs a schema", self.id)));
        }
        if let Some(s) = self.gen_spec()? {
            s.validate()?;
        }
        Ok(())
    }

    /// Materializes the dataset (calibrating generated data when asked).
    pub fn load(&self) -> Result<Dataset> {
        if let Some(spec) = self.gen_spec()? {
            let spec = if self.calibrate && spec.target_fdr.is_some() {
                calibrate_to_fdr(&spec)?
            } else {
                spec
            };
            return generate(&spec);
        }
        let path = self.csv.as_ref().expect("checked");
        Ok(load_csv(path, self.schema.as_ref().expect("checked"))?.dataset)
    }
}

fn default_reps() -> usize {
    100
}

fn default_fraction() -> f64 {
    0.2
}

fn default_parallel() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub techniques: Vec<TechniqueConfig>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_fraction")]
    pub tuning_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
}

impl BenchConfig {
    pub fn new(datasets: Vec<DatasetConfig>, techniques: Vec<TechniqueConfig>) -> Self {
        BenchConfig {
            datasets,
            techniques,
            repetitions: default_reps(),
            test_fraction: default_fraction(),
            tuning_fraction: default_fraction(),
            seed: 0,
            output_dir: None,
            averaging: Averaging::Auto,
            timing: TimingMode::Wall,
            parallel: 1,
        }
    }

    /// Parses a JSON config. Unknown technique ids surface as
    /// [`Error::UnknownTechnique`] before anything else is checked.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if let Some(ts) = v.get("techniques").and_then(|t| t.as_array()) {
            for t in ts {
                TechniqueConfig::from_value(t)?;
            }
        }
        let cfg: BenchConfig = serde_json::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be ≥ 1".into()));
        }
        let (a, b) = (self.test_fraction, self.tuning_fraction);
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0 && a + b < 1.0) {
            return Err(Error::Config(format!("fractions test {a} + tuning {b} must be in (0, 1)")));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets".into()));
        }
        if self.parallel == 0 {
            return Err(Error::Config("parallel must be ≥ 1".into()));
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate dataset id".into()));
        }
        let mut tids: Vec<&str> = self.techniques.iter().map(|t| t.id.as_str()).collect();
        tids.sort_unstable();
        if tids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate technique id".into()));
        }
        for d in &self.datasets {
            d.check()?;
        }
        Ok(())
    }

    /// Techniques in run order, with the baseline first.
    pub fn technique_list(&self) -> Vec<TechniqueConfig> {
        let mut out = vec![TechniqueConfig::baseline()];
        out.extend(self.techniques.iter().filter(|t| t.id != "baseline").cloned());
        out
    }
}

/// One aggregated report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub technique: String,
    pub mean_f1: Option<f64>,
    pub vmr: Option<f64>,
    pub train_ms: Option<f64>,
    pub infer_ms_per_1k: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub reps: usize,
    pub status: String,
}

impl BenchRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Median timings, written next to the main report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dataset: String,
    pub technique: String,
    pub train_ms_mean: f64,
    pub train_ms_median: f64,
    pub infer_ms_per_1k_mean: f64,
    pub infer_ms_per_1k_median: f64,
}

/// Per-repetition results of one (dataset, technique) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSeries {
    pub dataset: String,
    pub technique: String,
    pub f1: Vec<f64>,
    pub train_ms: Vec<f64>,
    pub infer_ms_per_1k: Vec<f64>,
    /// Error id of the first failing repetition.
    pub error: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub timings: Vec<TimingRow>,
    pub cells: Vec<CellSeries>,
}

impl BenchOutcome {
    pub fn cell(&self, dataset: &str, technique: &str) -> Option<&CellSeries> {
        self.cells.iter().find(|c| c.dataset == dataset && c.technique == technique)
    }

    pub fn row(&self, dataset: &str, technique: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.technique == technique)
    }

    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| !r.is_ok())
    }
}

/// Seeds of repetition `rep` on `dataset`. The split and model seeds do not
/// depend on the technique, so every technique is paired with the baseline.
pub fn rep_seeds(master: Seed, dataset: &str, technique: &str, rep: usize) -> (Seed, PipelineSeeds) {
    let r = master.derive_str(dataset).derive(rep as u64);
    (
        r.derive(0),
        PipelineSeeds {
            model: r.derive(1),
            technique: r.derive_str(technique),
        },
    )
}

struct RunResult {
    f1: f64,
    train_ms: f64,
    infer_ms_per_1k: f64,
}

fn scoring_for(averaging: Averaging, ds: &Dataset, positive: Option<usize>) -> Scoring {
    let pos = positive.unwrap_or_else(|| ds.minority_class());
    match averaging {
        Averaging::Binary => Scoring::Class(pos),
        Averaging::Macro => Scoring::Macro,
        Averaging::Weighted => Scoring::Weighted,
        Averaging::Auto if ds.n_classes() == 2 => Scoring::Class(pos),
        Averaging::Auto => Scoring::Macro,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &BenchConfig,
    dc: &DatasetConfig,
    ds: &Dataset,
    tc: &TechniqueConfig,
    scoring: Scoring,
    rep: usize,
) -> Result<RunResult> {
    let (split_seed, seeds) = rep_seeds(Seed(cfg.seed), &dc.id, &tc.id, rep);
    let split = three_way_split(ds, cfg.tuning_fraction, cfg.test_fraction, split_seed)?;
    let t0 = Instant::now();
    let fitted = fit_pipeline(&tc.technique, &dc.learner, &split.train, &split.tune, scoring, &seeds)?;
    let train = t0.elapsed();
    let t1 = Instant::now();
    let pred = fitted.predict(split.test.features())?;
    let infer = t1.elapsed();
    let f1 = scoring.score(split.test.labels(), &pred, ds.n_classes())?;
    let (train_ms, infer_ms_per_1k) = match cfg.timing {
        TimingMode::Off => (0.0, 0.0),
        TimingMode::Wall => (
            train.as_secs_f64() * 1e3,
            infer.as_secs_f64() * 1e3 * 1000.0 / split.test.n_samples() as f64,
        ),
    };
    Ok(RunResult {
        f1,
        train_ms,
        infer_ms_per_1k,
    })
}

/// Runs every (dataset, technique, repetition) cell. Failing cells are
/// reported with status `n/a: <error id>`; the rest of the matrix still runs.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let techniques = cfg.technique_list();
    let datasets: Vec<Dataset> = cfg.datasets.iter().map(|d| d.load()).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..techniques.len()).flat_map(move |t| (0..cfg.repetitions).map(move |r| (d, t, r))))
        .collect();
    let scorings: Vec<Scoring> = cfg
        .datasets
        .iter()
        .zip(&datasets)
        .map(|(dc, ds)| scoring_for(cfg.averaging, ds, dc.positive_class))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<RunResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, t, r)| run_one(cfg, &cfg.datasets[d], &datasets[d], &techniques[t], scorings[d], r))
            .collect()
    });

    let mut cells = Vec::new();
    let mut it = results.into_iter();
    for dc in &cfg.datasets {
        for tc in &techniques {
            let mut cell = CellSeries {
                dataset: dc.id.clone(),
                technique: tc.id.clone(),
                f1: Vec::new(),
                train_ms: Vec::new(),
                infer_ms_per_1k: Vec::new(),
                error: None,
            };
            for _ in 0..cfg.repetitions {
                match it.next().expect("one result per job") {
                    Ok(r) => {
                        cell.f1.push(r.f1);
                        cell.train_ms.push(r.train_ms);
                        cell.infer_ms_per_1k.push(r.infer_ms_per_1k);
                    }
                    Err(e) => {
                        cell.error.get_or_insert(e.id());
                    }
                }
            }
            cells.push(cell);
        }
    }
    let (rows, timings) = aggregate(&cells);
    Ok(BenchOutcome { rows, timings, cells })
}

fn aggregate(cells: &[CellSeries]) -> (Vec<BenchRow>, Vec<TimingRow>) {
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for c in cells {
        let baseline = cells
            .iter()
            .find(|b| b.dataset == c.dataset && b.technique == "baseline")
            .filter(|b| b.error.is_none());
        let ok = c.error.is_none();
        let mean_f1 = ok.then(|| mean(&c.f1));
        let base_f1 = baseline.map(|b| mean(&b.f1));
        let improvement_pct = if c.technique == "baseline" && ok {
            Some(0.0)
        } else {
            match (mean_f1, base_f1) {
                (Some(m), Some(b)) if b > 0.0 => Some(100.0 * (m - b) / b),
                _ => None,
            }
        };
        let v = if !ok {
            None
        } else if c.f1.len() < 2 {
            Some(0.0)
        } else {
            vmr(&c.f1).ok()
        };
        rows.push(BenchRow {
            dataset: c.dataset.clone(),
            technique: c.technique.clone(),
            mean_f1,
            vmr: v,
            train_ms: ok.then(|| mean(&c.train_ms)),
            infer_ms_per_1k: ok.then(|| mean(&c.infer_ms_per_1k)),
            improvement_pct,
            reps: c.f1.len(),
            status: match c.error {
                None => "ok".into(),
                Some(id) => format!("n/a: {id}"),
            },
        });
        if ok {
            timings.push(TimingRow {
                dataset: c.dataset.clone(),
                technique: c.technique.clone(),
                train_ms_mean: mean(&c.train_ms),
                train_ms_median: median(&c.train_ms),
                infer_ms_per_1k_mean: mean(&c.infer_ms_per_1k),
                infer_ms_per_1k_median: median(&c.infer_ms_per_1k),
            });
        }
    }
    rows.sort_by(|a, b| (&a.dataset, &a.technique).cmp(&(&b.dataset, &b.technique)));
    timings.sort_by(|a, b| (&a.dataset, &a.technique).cmp(&(&b.dataset, &b.technique)));
    (rows, timings)
}
