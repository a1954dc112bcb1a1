//! Minimal conditional variational autoencoder used as a class-conditional
//! sampler.
//!
//! Each class is standardized with its own statistics before encoding and
//! samples are mapped back with the same statistics.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ResampleSpec;
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::learners::mlp::AdamState;
use crate::matrix::Matrix;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub beta: f64,
    pub batch_size: usize,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        CvaeConfig {
            latent_dim: 4,
            hidden: vec![16],
            epochs: 200,
            lr: 1e-3,
            beta: 1.0,
            batch_size: 32,
        }
    }
}

/// Dense ReLU stack with a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Stack {
    sizes: Vec<usize>,
    params: Vec<f64>,
    adam: AdamState,
}

impl Stack {
    fn new(sizes: Vec<usize>, rng: &mut impl Rng) -> Self {
        let mut params = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fi, fo) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fi + fo) as f64).sqrt();
            params.extend((0..fi * fo).map(|_| rng.random_range(-limit..limit)));
            params.extend(std::iter::repeat(0.0).take(fo));
        }
        let n = params.len();
        Stack {
            sizes,
            params,
            adam: AdamState::new(n),
        }
    }

    fn buffers(&self) -> Vec<Vec<f64>> {
        self.sizes.iter().map(|&s| vec![0.0; s]).collect()
    }

    fn forward(&self, acts: &mut [Vec<f64>]) {
        let last = self.sizes.len() - 2;
        let mut off = 0;
        for l in 0..=last {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + nin * nout];
            let b = &self.params[off + nin * nout..off + nin * nout + nout];
            let (lo, hi) = acts.split_at_mut(l + 1);
            for o in 0..nout {
                let z = b[o]
                    + w[o * nin..(o + 1) * nin]
                        .iter()
                        .zip(&lo[l])
                        .map(|(a, x)| a * x)
                        .sum::<f64>();
                hi[0][o] = if l < last { z.max(0.0) } else { z };
            }
            off += nin * nout + nout;
        }
    }

    /// Accumulates parameter gradients for output gradient `dout` and
    /// returns the gradient with respect to the input.
    fn backward(&self, acts: &[Vec<f64>], dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let n_layers = self.sizes.len() - 1;
        let mut offs = vec![0];
        for l in 0..n_layers {
            offs.push(offs[l] + self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1]);
        }
        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let (wb, bb) = (offs[l], offs[l] + nin * nout);
            for o in 0..nout {
                for i in 0..nin {
                    grad[wb + o * nin + i] += delta[o] * acts[l][i];
                }
                grad[bb + o] += delta[o];
            }
            let mut prev = vec![0.0; nin];
            for (i, p) in prev.iter_mut().enumerate() {
                if l == 0 || acts[l][i] > 0.0 {
                    *p = (0..nout)
                        .map(|o| self.params[wb + o * nin + i] * delta[o])
                        .sum();
                }
            }
            delta = prev;
        }
        delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvaeModel {
    pub cfg: CvaeConfig,
    pub n_features: usize,
    pub n_classes: usize,
    /// Per-class standardization; `None` for classes absent from training.
    pub scalers: Vec<Option<Standardizer>>,
    encoder: Stack,
    decoder: Stack,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    /// Mean KL term of every training batch.
    pub kl_history: Vec<f64>,
}

fn one_hot(buf: &mut [f64], class: usize) {
    buf.iter_mut().for_each(|v| *v = 0.0);
    buf[class] = 1.0;
}

pub fn cvae_fit(ds: &Dataset, cfg: &CvaeConfig, seed: Seed) -> Result<CvaeModel> {
    if cfg.latent_dim == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(cfg.beta >= 0.0) {
        return Err(Error::InvalidParameter("cvae configuration".into()));
    }
    let (d, c, l) = (ds.n_features(), ds.n_classes(), cfg.latent_dim);
    let scalers: Vec<Option<Standardizer>> = (0..c)
        .map(|k| {
            let idx = ds.class_indices(k);
            (!idx.is_empty()).then(|| Standardizer::fit(&ds.features().select_rows(&idx)))
        })
        .collect();
    let mut init = seed.derive(0).rng();
    let mut enc_sizes = vec![d + c];
    enc_sizes.extend(&cfg.hidden);
    enc_sizes.push(2 * l);
    let mut dec_sizes = vec![l + c];
    dec_sizes.extend(&cfg.hidden);
    dec_sizes.push(d);
    let mut model = CvaeModel {
        cfg: cfg.clone(),
        n_features: d,
        n_classes: c,
        scalers,
        encoder: Stack::new(enc_sizes, &mut init),
        decoder: Stack::new(dec_sizes, &mut init),
        loss_history: Vec::new(),
        kl_history: Vec::new(),
    };
    let mut rng = seed.derive(1).rng();
    let mut ea = model.encoder.buffers();
    let mut da = model.decoder.buffers();
    let mut ge = vec![0.0; model.encoder.params.len()];
    let mut gd = vec![0.0; model.decoder.params.len()];
    let mut eps = vec![0.0; l];
    let mut order: Vec<usize> = (0..ds.n_samples()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            ge.iter_mut().for_each(|g| *g = 0.0);
            gd.iter_mut().for_each(|g| *g = 0.0);
            let bn = batch.len() as f64;
            let mut batch_kl = 0.0;
            for &i in batch {
                let y = ds.labels()[i];
                let scaler = model.scalers[y].as_ref().expect("present class");
                scaler.transform_row(ds.row(i), &mut ea[0][..d]);
                one_hot(&mut ea[0][d..], y);
                model.encoder.forward(&mut ea);
                let out = ea.last().unwrap();
                let (mu, lv) = (&out[..l], &out[l..]);
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                for j in 0..l {
                    da[0][j] = mu[j] + (0.5 * lv[j]).exp() * eps[j];
                }
                one_hot(&mut da[0][l..], y);
                model.decoder.forward(&mut da);
                let xhat = da.last().unwrap();
                let x = &ea[0][..d];
                let recon: f64 = xhat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                let kl: f64 = (0..l)
                    .map(|j| 0.5 * (mu[j] * mu[j] + (lv[j].exp_m1() - lv[j])))
                    .sum();
                epoch_loss += recon + cfg.beta * kl;
                batch_kl += kl;
                let dx: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| 2.0 * (a - b) / bn).collect();
                let dz = model.decoder.backward(&da, &dx, &mut gd);
                let mut dout = vec![0.0; 2 * l];
                for j in 0..l {
                    let s = (0.5 * lv[j]).exp();
                    dout[j] = dz[j] + cfg.beta * mu[j] / bn;
                    dout[l + j] = dz[j] * 0.5 * s * eps[j] + cfg.beta * 0.5 * lv[j].exp_m1() / bn;
                }
                model.encoder.backward(&ea, &dout, &mut ge);
            }
            if !epoch_loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            model.kl_history.push(batch_kl / bn);
            let Stack { params, adam, .. } = &mut model.encoder;
            adam.step(params, &ge, cfg.lr);
            let Stack { params, adam, .. } = &mut model.decoder;
            adam.step(params, &gd, cfg.lr);
        }
        model.loss_history.push(epoch_loss / ds.n_samples() as f64);
    }
    Ok(model)
}

/// `n` rows decoded from `z ~ N(0, I)` conditioned on `class`.
pub fn cvae_sample(model: &CvaeModel, class: usize, n: usize, seed: Seed) -> Result<Dataset> {
    let scaler = model
        .scalers
        .get(class)
        .and_then(|s| s.as_ref())
        .ok_or(Error::UnknownClass(class))?;
    let l = model.cfg.latent_dim;
    let mut rng = seed.rng();
    let mut da = model.decoder.buffers();
    let mut data = Vec::with_capacity(n * model.n_features);
    for _ in 0..n {
        for j in 0..l {
            da[0][j] = rng.sample(StandardNormal);
        }
        one_hot(&mut da[0][l..], class);
        model.decoder.forward(&mut da);
        data.extend(scaler.inverse_row(da.last().unwrap()));
    }
    if n == 0 {
        return Ok(Dataset::empty(model.n_features, model.n_classes));
    }
    Dataset::new(Matrix::new(n, model.n_features, data)?, vec![class; n], model.n_classes)
}

/// Fits one CVAE on `ds` and tops every short class up to its target with
/// decoded samples.
pub(crate) fn cvae_oversample(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    let targets = spec.targets(ds);
    if targets
        .iter()
        .zip(ds.class_counts())
        .all(|(&t, &n)| t <= n)
    {
        return Ok(ds.clone());
    }
    let model = cvae_fit(ds, &spec.cvae, seed.derive(0))?;
    let mut out = ds.clone();
    for (c, &t) in targets.iter().enumerate() {
        let n = ds.class_counts()[c];
        if t <= n {
            continue;
        }
        let s = cvae_sample(&model, c, t - n, seed.derive(1 + c as u64))?;
        out = out.concat(&s)?;
    }
    Ok(out)
}
