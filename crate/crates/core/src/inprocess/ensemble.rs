//! Bagging, SAMME boosting and the balanced random forest.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{balanced_bootstrap_indices, balanced_size};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::forest::train_with_sampler;
use crate::learners::{
    train_tree, Classifier, ForestConfig, ForestModel, LearnerSpec, TreeConfig,
};
use crate::matrix::Matrix;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq)]
pub enum CombineRule {
    MajorityVote,
    WeightedVote(Vec<f64>),
    MeanProba,
}

pub struct EnsembleModel {
    pub members: Vec<Box<dyn Classifier>>,
    pub combine: CombineRule,
    pub member_seeds: Vec<Seed>,
    n_features: usize,
    n_classes: usize,
}

impl std::fmt::Debug for EnsembleModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleModel")
            .field("members", &self.members.len())
            .field("combine", &self.combine)
            .finish()
    }
}

impl EnsembleModel {
    pub fn new(
        members: Vec<Box<dyn Classifier>>,
        combine: CombineRule,
        member_seeds: Vec<Seed>,
    ) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidParameter("ensemble needs a member".into()))?;
        if let CombineRule::WeightedVote(a) = &combine {
            if a.len() != members.len() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("one finite weight per member".into()));
            }
        }
        Ok(EnsembleModel {
            n_features: first.n_features(),
            n_classes: first.n_classes(),
            members,
            combine,
            member_seeds,
        })
    }

    fn vote_weights(&self) -> Vec<f64> {
        match &self.combine {
            CombineRule::WeightedVote(a) => a.clone(),
            _ => vec![1.0; self.members.len()],
        }
    }

    /// Per-row vote tallies and mean member probabilities.
    pub fn tally(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let w = self.vote_weights();
        let mut votes = Matrix::zeros(x.rows(), self.n_classes);
        let mut mean = Matrix::zeros(x.rows(), self.n_classes);
        for (m, wm) in self.members.iter().zip(&w) {
            let p = m.predict_proba(x)?;
            for i in 0..x.rows() {
                let row = p.row(i);
                let k = crate::matrix::argmax(row);
                votes.row_mut(i)[k] += wm;
                mean.row_mut(i).iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
        }
        let n = self.members.len() as f64;
        for i in 0..x.rows() {
            mean.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
        Ok((votes, mean))
    }
}

/// Highest tally; ties go to the higher mean probability, then the lower id.
pub(crate) fn resolve_vote(votes: &[f64], mean: &[f64]) -> usize {
    let mut best = 0;
    for c in 1..votes.len() {
        let better = votes[c] > votes[best] || (votes[c] == votes[best] && mean[c] > mean[best]);
        if better {
            best = c;
        }
    }
    best
}

impl Classifier for EnsembleModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean member probability for `MeanProba` and `MajorityVote`; normalized
    /// weighted vote shares for `WeightedVote`.
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let (votes, mean) = self.tally(x)?;
        match &self.combine {
            CombineRule::WeightedVote(_) => {
                let mut out = votes;
                for i in 0..out.rows() {
                    let r = out.row_mut(i);
                    let s: f64 = r.iter().sum();
                    if s > 0.0 {
                        r.iter_mut().for_each(|v| *v /= s);
                    } else {
                        let u = 1.0 / r.len() as f64;
                        r.iter_mut().for_each(|v| *v = u);
                    }
                }
                Ok(out)
            }
            _ => Ok(mean),
        }
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self.combine {
            CombineRule::MeanProba => Ok(self.predict_proba(x)?.argmax_rows()),
            _ => {
                let (votes, mean) = self.tally(x)?;
                Ok((0..x.rows())
                    .map(|i| resolve_vote(votes.row(i), mean.row(i)))
                    .collect())
            }
        }
    }
}

/// Bagging over balanced bootstraps. Member `m` uses seed `seed.derive(m)`:
/// its bootstrap is drawn from `.derive(0)` and the learner fit with `.derive(1)`.
pub fn bagging_fit(
    ds: &Dataset,
    base: &LearnerSpec,
    n_estimators: usize,
    seed: Seed,
) -> Result<EnsembleModel> {
    if n_estimators == 0 {
        return Err(Error::InvalidParameter("n_estimators must be ≥ 1".into()));
    }
    let seeds: Vec<Seed> = (0..n_estimators as u64).map(|m| seed.derive(m)).collect();
    bagging_fit_with_seeds(ds, base, &seeds)
}

pub fn bagging_fit_with_seeds(
    ds: &Dataset,
    base: &LearnerSpec,
    seeds: &[Seed],
) -> Result<EnsembleModel> {
    balanced_size(ds)?;
    let members = seeds
        .par_iter()
        .map(|s| {
            let idx = balanced_bootstrap_indices(ds, &mut s.derive(0).rng())?;
            base.fit(&ds.subset(&idx), None, s.derive(1))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, CombineRule::MajorityVote, seeds.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingConfig {
    pub n_rounds: usize,
    pub tree: TreeConfig,
    /// Draw a new weight-biased balanced subset every round; when false the
    /// first subset is reused and the weights enter the tree instead.
    pub redraw_each_round: bool,
    pub max_retries: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        BoostingConfig {
            n_rounds: 50,
            tree: TreeConfig {
                max_depth: Some(3),
                ..TreeConfig::default()
            },
            redraw_each_round: true,
            max_retries: 10,
        }
    }
}

pub const MIN_ERROR: f64 = 1e-10;

/// `ln((1 − ε) / ε) + ln(C − 1)` with ε clamped to `[MIN_ERROR, 1 − MIN_ERROR]`.
pub fn samme_alpha(eps: f64, n_classes: usize) -> f64 {
    let e = eps.clamp(MIN_ERROR, 1.0 - MIN_ERROR);
    ((1.0 - e) / e).ln() + ((n_classes as f64) - 1.0).ln()
}

/// Per accepted round: weighted error, α, misclassified rows and the
/// normalized sample weights after the update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    pub errors: Vec<f64>,
    pub alphas: Vec<f64>,
    pub misclassified: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub rejected: usize,
}

fn weighted_draw(members: &[usize], w: &[f64], m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(members.len());
    let mut acc = 0.0;
    for &i in members {
        acc += w[i];
        cdf.push(acc);
    }
    (0..m)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(members.len() - 1);
            members[k]
        })
        .collect()
}

pub fn boosting_fit(ds: &Dataset, cfg: &BoostingConfig, seed: Seed) -> Result<EnsembleModel> {
    boosting_fit_traced(ds, cfg, seed).map(|(m, _)| m)
}

/// SAMME on balanced bootstraps. Rounds run strictly in order.
pub fn boosting_fit_traced(
    ds: &Dataset,
    cfg: &BoostingConfig,
    seed: Seed,
) -> Result<(EnsembleModel, BoostTrace)> {
    if cfg.n_rounds == 0 {
        return Err(Error::InvalidParameter("n_rounds must be ≥ 1".into()));
    }
    let (present, m) = balanced_size(ds)?;
    let n = ds.n_samples();
    let c = ds.n_classes();
    let reject_at = 1.0 - 1.0 / c as f64;
    let class_rows: Vec<Vec<usize>> = present.iter().map(|&k| ds.class_indices(k)).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut trace = BoostTrace::default();
    let mut members: Vec<Box<dyn Classifier>> = Vec::new();
    let mut seeds = Vec::new();
    let mut fixed: Option<Vec<usize>> = None;
    'rounds: for t in 0..cfg.n_rounds {
        let mut accepted = None;
        for attempt in 0..=cfg.max_retries {
            let s = seed.derive(t as u64).derive(attempt as u64);
            let mut rng = s.derive(0).rng();
            let (rows, tree_w) = if cfg.redraw_each_round {
                let rows: Vec<usize> = class_rows
                    .iter()
                    .flat_map(|r| weighted_draw(r, &w, m, &mut rng))
                    .collect();
                (rows, None)
            } else {
                let rows = fixed
                    .get_or_insert_with(|| {
                        balanced_bootstrap_indices(ds, &mut rng).expect("checked above")
                    })
                    .clone();
                let tw: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
                (rows, Some(tw))
            };
            let tree = train_tree(&ds.subset(&rows), tree_w.as_deref(), &cfg.tree, s.derive(1))?;
            let pred = tree.predict(ds.features())?;
            let wrong: Vec<usize> = (0..n).filter(|&i| pred[i] != ds.labels()[i]).collect();
            let eps: f64 = wrong.iter().map(|&i| w[i]).sum::<f64>() / w.iter().sum::<f64>();
            if eps >= reject_at {
                trace.rejected += 1;
                continue;
            }
            accepted = Some((tree, wrong, eps, s));
            break;
        }
        let Some((tree, wrong, eps, s)) = accepted else {
            if members.is_empty() {
                return Err(Error::AllRoundsRejected);
            }
            break 'rounds;
        };
        let alpha = samme_alpha(eps, c);
        let boost = alpha.exp();
        for &i in &wrong {
            w[i] *= boost;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        members.push(Box::new(tree));
        seeds.push(s);
        trace.errors.push(eps);
        trace.alphas.push(alpha);
        trace.misclassified.push(wrong);
        trace.weights.push(w.clone());
        if eps <= MIN_ERROR {
            break;
        }
    }
    let alphas = trace.alphas.clone();
    Ok((EnsembleModel::new(members, CombineRule::WeightedVote(alphas), seeds)?, trace))
}

/// Balanced random forest: every tree grows on its own balanced bootstrap
/// with √d candidate features per split.
pub fn brf_fit(ds: &Dataset, n_trees: usize, seed: Seed) -> Result<ForestModel> {
    balanced_size(ds)?;
    let cfg = ForestConfig {
        n_estimators: n_trees,
        ..ForestConfig::default()
    };
    train_with_sampler(ds, &cfg, seed, |rng| {
        let mut counts = vec![0.0; ds.n_samples()];
        for i in balanced_bootstrap_indices(ds, rng).expect("checked above") {
            counts[i] += 1.0;
        }
        counts
    })
}

/// The balanced subset tree `t` of [`brf_fit`] was grown on (as row counts).
pub fn brf_tree_counts(ds: &Dataset, seed: Seed, t: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; ds.n_samples()];
    for i in balanced_bootstrap_indices(ds, &mut seed.derive(t as u64).derive(0).rng())? {
        counts[i] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inprocess::balanced_bootstrap;
    use crate::learners::{train_forest, MaxFeatures};
    use rand_distr::StandardNormal;

    fn blobs(counts: &[usize], sep: f64, seed: u64) -> Dataset {
        let mut rng = Seed(seed).rng();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                rows.push([a + sep * c as f64, b]);
                y.push(c);
            }
        }
        Dataset::from_rows(&rows, y).unwrap()
    }

    fn tree_spec() -> LearnerSpec {
        LearnerSpec::Tree(TreeConfig::default())
    }

    #[test]
    fn single_member_bagging_is_the_base_model() {
        let ds = blobs(&[60, 15], 1.0, 1);
        let e = bagging_fit(&ds, &tree_spec(), 1, Seed(4)).unwrap();
        let s = Seed(4).derive(0);
        let boot = balanced_bootstrap(&ds, s.derive(0)).unwrap();
        let t = train_tree(&boot, None, &TreeConfig::default(), s.derive(1)).unwrap();
        assert_eq!(e.predict(ds.features()).unwrap(), t.predict(ds.features()).unwrap());
    }

    #[test]
    fn identical_members_vote_like_one() {
        let ds = blobs(&[60, 15], 1.0, 2);
        let e = bagging_fit_with_seeds(&ds, &tree_spec(), &[Seed(9); 5]).unwrap();
        let one = bagging_fit_with_seeds(&ds, &tree_spec(), &[Seed(9)]).unwrap();
        assert_eq!(e.predict(ds.features()).unwrap(), one.predict(ds.features()).unwrap());
    }

    #[test]
    fn vote_matches_recount() {
        let ds = blobs(&[50, 20, 30], 0.7, 3);
        let e = bagging_fit(&ds, &tree_spec(), 7, Seed(1)).unwrap();
        let got = e.predict(ds.features()).unwrap();
        let preds: Vec<Vec<usize>> = e
            .members
            .iter()
            .map(|m| m.predict(ds.features()).unwrap())
            .collect();
        let probs: Vec<Matrix> = e
            .members
            .iter()
            .map(|m| m.predict_proba(ds.features()).unwrap())
            .collect();
        for i in 0..ds.n_samples() {
            let mut count = [0usize; 3];
            let mut mean = [0.0f64; 3];
            for (p, pr) in preds.iter().zip(&probs) {
                count[p[i]] += 1;
                for c in 0..3 {
                    mean[c] += pr.get(i, c) / 7.0;
                }
            }
            let top = *count.iter().max().unwrap();
            let tied: Vec<usize> = (0..3).filter(|&c| count[c] == top).collect();
            let best = tied
                .iter()
                .copied()
                .fold(tied[0], |b, c| if mean[c] > mean[b] { c } else { b });
            assert_eq!(got[i], best);
        }
    }

    #[test]
    fn samme_alpha_values() {
        assert_eq!(samme_alpha(0.5, 2), 0.0);
        assert!((samme_alpha(0.25, 3) - (3.0f64.ln() + 2.0f64.ln())).abs() < 1e-12);
        assert!((samme_alpha(0.0, 2) - ((1.0 - 1e-10) / 1e-10f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn boosting_stops_on_perfect_round() {
        let ds = blobs(&[40, 10], 20.0, 4);
        let (m, tr) = boosting_fit_traced(&ds, &BoostingConfig::default(), Seed(0)).unwrap();
        assert_eq!(m.members.len(), 1);
        assert_eq!(tr.errors, vec![0.0]);
        assert_eq!(m.predict(ds.features()).unwrap(), ds.labels());
    }

    #[test]
    fn boosting_weights_stay_a_distribution_and_grow_on_errors() {
        let ds = blobs(&[120, 30], 0.8, 5);
        let cfg = BoostingConfig {
            n_rounds: 15,
            tree: TreeConfig {
                max_depth: Some(1),
                ..TreeConfig::default()
            },
            ..Default::default()
        };
        let (m, tr) = boosting_fit_traced(&ds, &cfg, Seed(2)).unwrap();
        assert!(m.members.len() > 1);
        let mut prev = vec![1.0 / 150.0; 150];
        for r in 0..tr.weights.len() {
            let w = &tr.weights[r];
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if tr.errors[r] > 0.0 && tr.errors[r] < 0.5 {
                for &i in &tr.misclassified[r] {
                    assert!(w[i] > prev[i]);
                }
            }
            prev = w.clone();
        }
        for r in m.predict_proba(ds.features()).unwrap().iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn brf_trees_see_balanced_subsets() {
        let ds = blobs(&[90, 10], 1.0, 6);
        let f = brf_fit(&ds, 5, Seed(3)).unwrap();
        assert_eq!(f.trees.len(), 5);
        for t in 0..5 {
            let counts = brf_tree_counts(&ds, Seed(3), t).unwrap();
            let per: Vec<usize> = (0..2)
                .map(|c| ds.class_indices(c).iter().map(|&i| counts[i]).sum())
                .collect();
            assert_eq!(per, vec![10, 10]);
        }
        let one = brf_fit(&ds, 1, Seed(3)).unwrap();
        let counts: Vec<f64> = brf_tree_counts(&ds, Seed(3), 0)
            .unwrap()
            .iter()
            .map(|&c| c as f64)
            .collect();
        let rows: Vec<usize> = (0..100).filter(|&i| counts[i] > 0.0).collect();
        let cfg = TreeConfig {
            max_features: MaxFeatures::Sqrt,
            ..TreeConfig::default()
        };
        let t = crate::learners::tree::grow(&ds, &counts, rows, &cfg, Seed(3).derive(0).derive(1))
            .unwrap();
        assert_eq!(one.trees[0], t);
    }

    #[test]
    fn brf_minority_recall_not_below_forest() {
        let mut brf = 0.0;
        let mut rf = 0.0;
        for s in 0..30 {
            let train = blobs(&[900, 100], 1.0, 100 + s);
            let test = blobs(&[900, 100], 1.0, 200 + s);
            let cfg = ForestConfig {
                n_estimators: 20,
                ..Default::default()
            };
            let recall = |p: Vec<usize>| {
                let pos = test.class_indices(1);
                pos.iter().filter(|&&i| p[i] == 1).count() as f64 / pos.len() as f64
            };
            rf += recall(train_forest(&train, &cfg, Seed(s)).unwrap().predict(test.features()).unwrap());
            brf += recall(brf_fit(&train, 20, Seed(s)).unwrap().predict(test.features()).unwrap());
        }
        assert!(brf >= rf, "brf {brf} rf {rf}");
    }
}
