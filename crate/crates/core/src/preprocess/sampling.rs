//! Over-, under- and hybrid resampling.

use rand::seq::index;
use rand::Rng;

use super::ResampleSpec;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::{kmeans_fit, KMeansConfig, KnnIndex};
use crate::metrics::largest_remainder;
use crate::seed::Seed;

/// Random oversampling: duplicates rows of each short class uniformly with
/// replacement.
pub fn ros(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    let targets = spec.targets(ds);
    let mut out = ds.clone();
    for (c, &t) in targets.iter().enumerate() {
        let n = ds.class_counts().get(c).copied().unwrap_or(0);
        if t <= n {
            continue;
        }
        if n == 0 {
            return Err(Error::EmptyClass(c));
        }
        let members = ds.class_indices(c);
        let mut rng = seed.derive(c as u64).rng();
        let rows: Vec<Vec<f64>> = (0..t - n)
            .map(|_| ds.row(members[rng.random_range(0..n)]).to_vec())
            .collect();
        out = out.append_rows(&rows, c)?;
    }
    Ok(out)
}

enum Anchors {
    Uniform,
    Adaptive,
}

/// Interpolating oversampler shared by SMOTE and ADASYN.
fn interpolate(
    ds: &Dataset,
    spec: &ResampleSpec,
    seed: Seed,
    anchors: Anchors,
    lambda: Option<f64>,
) -> Result<Dataset> {
    let targets = spec.targets(ds);
    let k = spec.k_neighbors;
    let mut index: Option<KnnIndex> = None;
    let mut out = ds.clone();
    for (c, &t) in targets.iter().enumerate() {
        let n = ds.class_counts().get(c).copied().unwrap_or(0);
        if t <= n {
            continue;
        }
        if n <= k {
            return Err(Error::TooFewMinority { class: c, count: n, k });
        }
        let index = index.get_or_insert_with(|| KnnIndex::from_dataset(ds));
        let members = ds.class_indices(c);
        let need = t - n;
        let mut rng = seed.derive(c as u64).rng();
        let per_anchor: Vec<usize> = match anchors {
            Anchors::Uniform => {
                let mut counts = vec![0; n];
                for _ in 0..need {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts
            }
            Anchors::Adaptive => {
                let hardness = hardness_with(ds, index, c, k)?;
                if hardness.iter().all(|&r| r == 0.0) {
                    return Err(Error::NoBoundarySamples);
                }
                largest_remainder(&hardness, need)
            }
        };
        let mut rows = Vec::with_capacity(need);
        for (a, &count) in per_anchor.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let i = members[a];
            let nn = index.query_member(i, k, Some(c))?;
            let x = ds.row(i);
            for _ in 0..count {
                let y = ds.row(nn[rng.random_range(0..k)]);
                let l = lambda.unwrap_or_else(|| rng.random::<f64>());
                rows.push(x.iter().zip(y).map(|(a, b)| a + l * (b - a)).collect());
            }
        }
        out = out.append_rows(&rows, c)?;
    }
    Ok(out)
}

/// SMOTE: each synthetic row lies on the segment from a random class member
/// to one of its `k` same-class nearest neighbours.
pub fn smote(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    interpolate(ds, spec, seed, Anchors::Uniform, None)
}

/// SMOTE with every interpolation coefficient fixed to `lambda`.
pub fn smote_with_lambda(
    ds: &Dataset,
    spec: &ResampleSpec,
    seed: Seed,
    lambda: f64,
) -> Result<Dataset> {
    interpolate(ds, spec, seed, Anchors::Uniform, Some(lambda))
}

/// ADASYN: synthetics are allocated to class members in proportion to the
/// share of other-class points among their `k` nearest neighbours.
pub fn adasyn(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    interpolate(ds, spec, seed, Anchors::Adaptive, None)
}

fn hardness_with(ds: &Dataset, index: &KnnIndex, c: usize, k: usize) -> Result<Vec<f64>> {
    ds.class_indices(c)
        .iter()
        .map(|&i| {
            let nn = index.query_member(i, k, None)?;
            let foreign = nn.iter().filter(|&&j| ds.labels()[j] != c).count();
            Ok(foreign as f64 / k as f64)
        })
        .collect()
}

/// Share of other-class rows among the `k` nearest neighbours (any class) of
/// each member of class `c`, in row order.
pub fn adasyn_hardness(ds: &Dataset, c: usize, k: usize) -> Result<Vec<f64>> {
    hardness_with(ds, &KnnIndex::from_dataset(ds), c, k)
}

/// Rows to keep after undersampling: every row of untouched classes plus a
/// per-class choice for each reduced class.
fn reduced_classes(ds: &Dataset, spec: &ResampleSpec) -> Result<Vec<(usize, usize)>> {
    let targets = spec.targets(ds);
    let mut out = Vec::new();
    for (c, &t) in targets.iter().enumerate() {
        let n = ds.class_counts().get(c).copied().unwrap_or(0);
        if t > n {
            return Err(Error::TargetExceedsCount {
                class: c,
                target: t,
                count: n,
            });
        }
        if t < n {
            out.push((c, t));
        }
    }
    Ok(out)
}

/// Random undersampling without replacement; kept rows stay in order.
pub fn rus(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    let reduce = reduced_classes(ds, spec)?;
    let mut keep = vec![true; ds.n_samples()];
    for &(c, t) in &reduce {
        let members = ds.class_indices(c);
        members.iter().for_each(|&i| keep[i] = false);
        let mut rng = seed.derive(c as u64).rng();
        for j in index::sample(&mut rng, members.len(), t) {
            keep[members[j]] = true;
        }
    }
    let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| keep[i]).collect();
    Ok(ds.subset(&rows))
}

/// Replaces each reduced class by the K-Means centroids of its rows.
pub fn cluster_centroids(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    let reduce = reduced_classes(ds, spec)?;
    let mut keep = vec![true; ds.n_samples()];
    let mut appended = Vec::new();
    for &(c, t) in &reduce {
        let members = ds.class_indices(c);
        members.iter().for_each(|&i| keep[i] = false);
        let k = spec.n_clusters.unwrap_or(t);
        let points = ds.features().select_rows(&members);
        let model = kmeans_fit(&points, &KMeansConfig::new(k), seed.derive(c as u64))?;
        let rows: Vec<Vec<f64>> = model.centroids.iter_rows().map(|r| r.to_vec()).collect();
        appended.push((c, rows));
    }
    let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| keep[i]).collect();
    let mut out = ds.subset(&rows);
    for (c, rows) in appended {
        out = out.append_rows(&rows, c)?;
    }
    Ok(out)
}

/// Mutual global nearest neighbours with different labels, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TomekPair {
    pub index_a: usize,
    pub index_b: usize,
}

pub fn find_tomek_links(ds: &Dataset) -> Vec<TomekPair> {
    let nn = KnnIndex::from_dataset(ds).nearest_of_all();
    let y = ds.labels();
    (0..nn.len())
        .filter(|&a| {
            let b = nn[a];
            a < b && nn[b] == a && y[a] != y[b]
        })
        .map(|a| TomekPair {
            index_a: a,
            index_b: nn[a],
        })
        .collect()
}

/// SMOTE, then from every Tomek link drop the member whose class was larger
/// in the input (neither when the two classes were equally large).
pub fn smote_tomek(ds: &Dataset, spec: &ResampleSpec, seed: Seed) -> Result<Dataset> {
    let s = smote(ds, spec, seed)?;
    let counts = ds.class_counts();
    let mut keep = vec![true; s.n_samples()];
    for link in find_tomek_links(&s) {
        let (ya, yb) = (s.labels()[link.index_a], s.labels()[link.index_b]);
        if counts[ya] > counts[yb] {
            keep[link.index_a] = false;
        } else if counts[yb] > counts[ya] {
            keep[link.index_b] = false;
        }
    }
    let rows: Vec<usize> = (0..s.n_samples()).filter(|&i| keep[i]).collect();
    Ok(s.subset(&rows))
}
