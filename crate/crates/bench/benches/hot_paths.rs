use criterion::{black_box, criterion_group, criterion_main, Criterion};

use rlad_bench::{config, prepared, selection_inputs};
use rlad_core::tsf::{self, TsfModel};
use rlad_core::{DetectorKind, DetectorModel, DqnConfig, DqnPolicy, EpsilonSchedule, Hyperparams, SelectionEnv, TsfParams};

fn detectors(c: &mut Criterion) {
    let cfg = config();
    let prep = prepared(&cfg);
    let knn = DetectorModel::fit(&prep.normal_windows, &Hyperparams::default_for(DetectorKind::Knn)).unwrap();
    c.bench_function("knn_score_1008_windows", |b| b.iter(|| knn.score(black_box(&prep.test_windows)).unwrap()));

    let iforest = Hyperparams::default_for(DetectorKind::IForest);
    c.bench_function("iforest_fit", |b| b.iter(|| DetectorModel::fit(black_box(&prep.normal_windows), &iforest).unwrap()));

    let ecod = DetectorModel::fit(&prep.normal_windows, &Hyperparams::default_for(DetectorKind::Ecod)).unwrap();
    c.bench_function("ecod_score_1008_windows", |b| b.iter(|| ecod.score(black_box(&prep.test_windows)).unwrap()));
}

fn selection(c: &mut Criterion) {
    let cfg = config();
    let prep = prepared(&cfg);
    let (table, stage) = selection_inputs(&cfg, &prep);

    let ds = tsf::build_dataset(&table, 0).unwrap();
    let train = ds.subset(&stage.split.train);
    let params = TsfParams { n_trees: 100, ..TsfParams::default() };
    let mut group = c.benchmark_group("tsf");
    group.sample_size(10);
    group.bench_function("fit_100_trees", |b| b.iter(|| TsfModel::fit(black_box(&train), &params).unwrap()));
    group.finish();

    let mut group = c.benchmark_group("dqn");
    group.sample_size(10);
    group.bench_function("train_2000_steps", |b| {
        b.iter(|| {
            let mut env = SelectionEnv::new(&table, &stage.predictions, &stage.gt_mask, cfg.reward.clone()).unwrap();
            let mut policy = DqnPolicy::new(env.state_dim(), DqnConfig::default()).unwrap();
            policy.train(&mut env, 2000, &EpsilonSchedule::default()).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, detectors, selection);
criterion_main!(benches);
