use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Row indices of a stratified partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, `max(1, round(n_i · test_fraction))` rows go to the test side
/// (never all of them). Both sides keep the original row order.
pub fn stratified_split_indices(
    ds: &Dataset,
    test_fraction: f64,
    seed: Seed,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(test_fraction));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..ds.n_classes() {
        let mut idx = ds.class_indices(c);
        let n = idx.len();
        if n == 0 {
            continue;
        }
        if n < 2 {
            return Err(Error::TooFewSamples {
                class: c,
                count: n,
                needed: 2,
            });
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        let mut rng = seed.derive(c as u64).rng();
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn stratified_split(
    ds: &Dataset,
    test_fraction: f64,
    seed: Seed,
) -> Result<(Dataset, Dataset)> {
    let s = stratified_split_indices(ds, test_fraction, seed)?;
    Ok((ds.subset(&s.train), ds.subset(&s.test)))
}

/// Train / tuning / test partition used by the benchmark runner.
#[derive(Debug, Clone)]
pub struct ThreeWaySplit {
    pub train: Dataset,
    pub tune: Dataset,
    pub test: Dataset,
}

pub fn three_way_split(
    ds: &Dataset,
    tune_fraction: f64,
    test_fraction: f64,
    seed: Seed,
) -> Result<ThreeWaySplit> {
    if !(tune_fraction > 0.0 && tune_fraction + test_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(tune_fraction + test_fraction));
    }
    let (rest, test) = stratified_split(ds, test_fraction, seed.derive(0))?;
    let (train, tune) =
        stratified_split(&rest, tune_fraction / (1.0 - test_fraction), seed.derive(1))?;
    Ok(ThreeWaySplit { train, tune, test })
}
