//! Fully connected network: ReLU hidden layers, SoftMax output, Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossSpec;
use super::{check_width, Classifier};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a lower training loss.
    pub patience: usize,
    pub loss: LossSpec,
    /// Standardize inputs with statistics of the training set.
    pub standardize: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![20, 10],
            lr: 1e-4,
            batch_size: 8,
            epochs: 200,
            patience: 20,
            loss: LossSpec::default(),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub(crate) fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1 = 1.0 - BETA1.powi(self.t as i32);
        let b2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            params[i] -= lr * (self.m[i] / b1) / ((self.v[i] / b2).sqrt() + ADAM_EPS);
        }
    }
}

/// Parameters are stored flat: per layer, the `[out × in]` weight block
/// (row-major) followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    params: Vec<f64>,
    pub scaler: Standardizer,
    pub loss: LossSpec,
    pub adam: AdamState,
    pub lr: f64,
    pub batch_size: usize,
    pub loss_history: Vec<f64>,
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl Workspace {
    fn new(sizes: &[usize]) -> Self {
        let widest = *sizes.iter().max().unwrap_or(&1);
        Workspace {
            acts: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            delta: vec![0.0; widest],
            prev: vec![0.0; widest],
        }
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = vec![0];
    for l in 0..sizes.len() - 1 {
        let last = *off.last().unwrap();
        off.push(last + sizes[l + 1] * sizes[l] + sizes[l + 1]);
    }
    off
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity input scaling.
    pub fn new(sizes: &[usize], loss: LossSpec, seed: Seed) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("layer sizes {sizes:?}")));
        }
        if sizes[sizes.len() - 1] < 2 {
            return Err(Error::TooFewClasses(sizes[sizes.len() - 1]));
        }
        loss.validate(sizes[sizes.len() - 1])?;
        let off = layer_offsets(sizes);
        let mut params = vec![0.0; *off.last().unwrap()];
        let mut rng = seed.rng();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[off[l]..off[l] + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        let n = params.len();
        Ok(MlpModel {
            sizes: sizes.to_vec(),
            params,
            scaler: Standardizer::identity(sizes[0]),
            loss,
            adam: AdamState::new(n),
            lr: 1e-3,
            batch_size: 8,
            loss_history: Vec::new(),
        })
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: self.params.len(),
                got: p.len(),
            });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Shape `[out, in]` of each weight block.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.n_layers())
            .map(|l| (self.sizes[l + 1], self.sizes[l]))
            .collect()
    }

    fn forward(&self, off: &[usize], x: &[f64], ws: &mut Workspace) {
        self.scaler.transform_row(x, &mut ws.acts[0]);
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off[l]..off[l] + nin * nout];
            let b = &self.params[off[l] + nin * nout..off[l + 1]];
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            let input = &lo[l];
            let out = &mut hi[0];
            for o in 0..nout {
                let row = &w[o * nin..(o + 1) * nin];
                let mut z = b[o];
                for i in 0..nin {
                    z += row[i] * input[i];
                }
                out[o] = if l < last { z.max(0.0) } else { z };
            }
        }
        let out = &mut ws.acts[last + 1];
        let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    /// Adds `scale`·∂loss/∂params of one sample into `grad`; returns the loss.
    fn backward(
        &self,
        off: &[usize],
        loss: &LossSpec,
        class: usize,
        scale: f64,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        let last = self.n_layers();
        let c_out = self.sizes[last];
        let probs = &ws.acts[last];
        let (value, factor) = loss.value_and_logit_factor(class, probs[class]);
        for j in 0..c_out {
            let ind = if j == class { 1.0 } else { 0.0 };
            ws.delta[j] = scale * factor * (ind - probs[j]);
        }
        for l in (0..last).rev() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let input = &ws.acts[l];
            let wbase = off[l];
            let bbase = off[l] + nin * nout;
            for o in 0..nout {
                let d = ws.delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[wbase + o * nin..wbase + (o + 1) * nin];
                for i in 0..nin {
                    g[i] += d * input[i];
                }
                grad[bbase + o] += d;
            }
            if l > 0 {
                let w = &self.params[wbase..bbase];
                for i in 0..nin {
                    let mut s = 0.0;
                    if input[i] > 0.0 {
                        for o in 0..nout {
                            s += w[o * nin + i] * ws.delta[o];
                        }
                    }
                    ws.prev[i] = s;
                }
                std::mem::swap(&mut ws.delta, &mut ws.prev);
            }
        }
        value
    }

    /// Mean (sample-weighted) loss over the rows of `x` and its gradient with
    /// respect to `parameters()`.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        labels: &[usize],
        sample_weights: Option<&[f64]>,
        loss: &LossSpec,
    ) -> Result<(f64, Vec<f64>)> {
        check_width(self.sizes[0], x)?;
        if labels.len() != x.rows() {
            return Err(Error::LengthMismatch {
                left: x.rows(),
                right: labels.len(),
            });
        }
        let off = layer_offsets(&self.sizes);
        let mut ws = Workspace::new(&self.sizes);
        let mut grad = vec![0.0; self.params.len()];
        let n = x.rows() as f64;
        let mut total = 0.0;
        for i in 0..x.rows() {
            let w = sample_weights.map_or(1.0, |s| s[i]);
            self.forward(&off, x.row(i), &mut ws);
            total += w * self.backward(&off, loss, labels[i], w / n, &mut ws, &mut grad);
        }
        Ok((total / n, grad))
    }
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.sizes[0]
    }

    fn n_classes(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.sizes[0], x)?;
        let off = layer_offsets(&self.sizes);
        let mut ws = Workspace::new(&self.sizes);
        let c = self.n_classes();
        let mut out = Matrix::zeros(x.rows(), c);
        for i in 0..x.rows() {
            self.forward(&off, x.row(i), &mut ws);
            out.row_mut(i).copy_from_slice(&ws.acts[self.n_layers()]);
        }
        Ok(out)
    }
}

pub fn train_mlp(ds: &Dataset, cfg: &MlpConfig, seed: Seed) -> Result<MlpModel> {
    train_mlp_weighted(ds, cfg, &cfg.loss, None, seed, None)
}

/// Mini-batch Adam training.
///
/// `epoch_sampler(e)` may replace the row set used in epoch `e` (rows may
/// repeat); the chosen rows are shuffled before batching either way.
pub fn train_mlp_weighted(
    ds: &Dataset,
    cfg: &MlpConfig,
    loss: &LossSpec,
    sample_weights: Option<&[f64]>,
    seed: Seed,
    epoch_sampler: Option<&dyn Fn(usize) -> Vec<usize>>,
) -> Result<MlpModel> {
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidParameter("batch_size and lr must be positive".into()));
    }
    let n = ds.n_samples();
    if let Some(w) = sample_weights {
        if w.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: w.len(),
            });
        }
    }
    let mut sizes = vec![ds.n_features()];
    sizes.extend(&cfg.hidden);
    sizes.push(ds.n_classes());
    let mut model = MlpModel::new(&sizes, loss.clone(), seed.derive(0))?;
    model.lr = cfg.lr;
    model.batch_size = cfg.batch_size;
    if cfg.standardize {
        model.scaler = Standardizer::fit(ds.features());
    }
    let off = layer_offsets(&sizes);
    let mut ws = Workspace::new(&sizes);
    let mut grad = vec![0.0; model.params.len()];
    let mut rng = seed.derive(1).rng();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = match epoch_sampler {
            Some(f) => f(epoch),
            None => (0..n).collect(),
        };
        if order.is_empty() {
            return Err(Error::EmptyDataset);
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let bn = batch.len() as f64;
            for &i in batch {
                let w = sample_weights.map_or(1.0, |s| s[i]);
                model.forward(&off, ds.row(i), &mut ws);
                let l = model.backward(&off, loss, ds.labels()[i], w / bn, &mut ws, &mut grad);
                epoch_loss += w * l;
            }
            if !epoch_loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            let MlpModel { params, adam, .. } = &mut model;
            adam.step(params, &grad, cfg.lr);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergedLoss { epoch });
        }
        let epoch_loss = epoch_loss / order.len() as f64;
        model.loss_history.push(epoch_loss);
        if epoch_loss < best {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(model)
}
