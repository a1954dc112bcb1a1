//! Label-flipping methods. Features are never modified.

use rand::seq::index;
use rand::Rng;

use super::FlipPair;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::{kmeans_fit, train_forest, Classifier, ForestConfig, ForestModel, KMeansConfig};
use crate::matrix::sq_dist;
use crate::seed::Seed;

pub const PROBE_TREES: usize = 25;

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidParameter(format!("fraction {f} not in [0, 1]")));
    }
    Ok(())
}

/// The forest whose minority probabilities rank rows for massaging.
pub fn massaging_probe(ds: &Dataset, seed: Seed) -> Result<ForestModel> {
    let cfg = ForestConfig {
        n_estimators: PROBE_TREES,
        ..ForestConfig::default()
    };
    train_forest(ds, &cfg, seed.derive_str("massaging-probe"))
}

/// Flips `⌊flip_fraction · n_majority⌋` majority rows with the highest probe
/// probability of the minority class (lower index first on ties).
pub fn massaging(ds: &Dataset, flip_fraction: f64, seed: Seed) -> Result<Dataset> {
    massaging_pair(ds, FlipPair::of(ds), flip_fraction, seed)
}

pub fn massaging_pair(ds: &Dataset, pair: FlipPair, flip_fraction: f64, seed: Seed) -> Result<Dataset> {
    check_fraction(flip_fraction)?;
    pair.check(ds)?;
    let members = ds.class_indices(pair.from);
    let m = (flip_fraction * members.len() as f64).floor() as usize;
    if m == 0 {
        return Ok(ds.clone());
    }
    let probe = massaging_probe(ds, seed)?;
    let probs = probe.predict_proba(&ds.features().select_rows(&members))?;
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        probs
            .get(b, pair.to)
            .total_cmp(&probs.get(a, pair.to))
            .then(a.cmp(&b))
    });
    let mut labels = ds.labels().to_vec();
    for &j in &order[..m] {
        labels[members[j]] = pair.to;
    }
    ds.with_labels(labels)
}

/// One uniform draw per row, in row order: majority rows flip when the draw
/// is below `p_majority_flip`, minority rows when below `p_minority_flip`.
pub fn perturbation(
    ds: &Dataset,
    p_majority_flip: f64,
    p_minority_flip: f64,
    seed: Seed,
) -> Result<Dataset> {
    perturbation_pair(ds, FlipPair::of(ds), p_majority_flip, p_minority_flip, seed)
}

pub fn perturbation_pair(
    ds: &Dataset,
    pair: FlipPair,
    p_majority_flip: f64,
    p_minority_flip: f64,
    seed: Seed,
) -> Result<Dataset> {
    check_fraction(p_majority_flip)?;
    check_fraction(p_minority_flip)?;
    pair.check(ds)?;
    let mut rng = seed.rng();
    let labels = ds
        .labels()
        .iter()
        .map(|&y| {
            let r: f64 = rng.random();
            if y == pair.from && r < p_majority_flip {
                pair.to
            } else if y == pair.to && r < p_minority_flip {
                pair.from
            } else {
                y
            }
        })
        .collect();
    ds.with_labels(labels)
}

/// Clusters the majority, picks the cluster whose centroid is nearest the
/// minority centroid and flips a uniform `⌊flip_fraction · size⌋` of it.
pub fn cluster_massaging(
    ds: &Dataset,
    n_clusters: usize,
    flip_fraction: f64,
    seed: Seed,
) -> Result<Dataset> {
    cluster_massaging_pair(ds, FlipPair::of(ds), n_clusters, flip_fraction, seed)
}

pub fn cluster_massaging_pair(
    ds: &Dataset,
    pair: FlipPair,
    n_clusters: usize,
    flip_fraction: f64,
    seed: Seed,
) -> Result<Dataset> {
    check_fraction(flip_fraction)?;
    pair.check(ds)?;
    let members = ds.class_indices(pair.from);
    let km = kmeans_fit(
        &ds.features().select_rows(&members),
        &KMeansConfig::new(n_clusters),
        seed.derive(0),
    )?;
    let minority = ds.class_indices(pair.to);
    let mut centre = vec![0.0; ds.n_features()];
    for &i in &minority {
        centre.iter_mut().zip(ds.row(i)).for_each(|(c, v)| *c += v);
    }
    centre.iter_mut().for_each(|c| *c /= minority.len() as f64);
    let mut near = 0;
    for c in 1..km.k {
        if sq_dist(km.centroids.row(c), &centre) < sq_dist(km.centroids.row(near), &centre) {
            near = c;
        }
    }
    let cluster: Vec<usize> = km.cluster_members(near).iter().map(|&j| members[j]).collect();
    let m = (flip_fraction * cluster.len() as f64).floor() as usize;
    let mut labels = ds.labels().to_vec();
    let mut rng = seed.derive(1).rng();
    for j in index::sample(&mut rng, cluster.len(), m) {
        labels[cluster[j]] = pair.to;
    }
    ds.with_labels(labels)
}
