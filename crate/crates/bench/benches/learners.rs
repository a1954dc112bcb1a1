use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use imbalance_core::datagen::{calibrate_to_fdr, detection_analog, generate};
use imbalance_core::inprocess::bagging_fit;
use imbalance_core::learners::{Classifier, ForestConfig, LearnerSpec, TreeConfig};
use imbalance_core::postprocess::{tune_threshold, IsotonicCalibrator};
use imbalance_core::preprocess::{resample, ResampleMethod, ResampleSpec};
use imbalance_core::split::ThreeWaySplit;
use imbalance_core::{three_way_split, Seed};

fn detection_split() -> ThreeWaySplit {
    let ds = generate(&calibrate_to_fdr(&detection_analog(1)).unwrap()).unwrap();
    three_way_split(&ds, 0.2, 0.2, Seed(1)).unwrap()
}

fn learners(c: &mut Criterion) {
    let split = detection_split();
    let tree = LearnerSpec::Tree(TreeConfig::default());
    let forest = LearnerSpec::Forest(ForestConfig { n_estimators: 20, ..Default::default() });

    c.bench_function("tree_fit", |b| b.iter(|| tree.fit(black_box(&split.train), None, Seed(2)).unwrap()));
    c.bench_function("forest20_fit", |b| b.iter(|| forest.fit(black_box(&split.train), None, Seed(2)).unwrap()));

    let model = tree.fit(&split.train, None, Seed(2)).unwrap();
    let x = split.test.features();
    c.bench_function("tree_predict", |b| b.iter(|| model.predict(black_box(x)).unwrap()));
    let bag = bagging_fit(&split.train, &tree, 10, Seed(2)).unwrap();
    c.bench_function("bagging10_predict", |b| b.iter(|| bag.predict(black_box(x)).unwrap()));
}

fn resampling(c: &mut Criterion) {
    let split = detection_split();
    let mut g = c.benchmark_group("resample");
    for method in [ResampleMethod::Ros, ResampleMethod::Smote, ResampleMethod::Rus, ResampleMethod::SmoteTomek] {
        let spec = ResampleSpec::new(method);
        g.bench_function(format!("{method:?}"), |b| {
            b.iter(|| resample(black_box(&split.train), &spec, Seed(3)).unwrap())
        });
    }
    g.finish();
}

fn postprocessing(c: &mut Criterion) {
    let split = detection_split();
    let model = LearnerSpec::default_forest().fit(&split.train, None, Seed(4)).unwrap();
    let probs = model.predict_proba(split.tune.features()).unwrap();
    let scores = probs.column(1);
    c.bench_function("tune_threshold", |b| {
        b.iter(|| tune_threshold(black_box(&scores), split.tune.labels(), 0.01).unwrap())
    });
    c.bench_function("isotonic_fit", |b| {
        b.iter(|| IsotonicCalibrator::fit(black_box(&probs), split.tune.labels()).unwrap())
    });
}

criterion_group!(benches, learners, resampling, postprocessing);
criterion_main!(benches);
