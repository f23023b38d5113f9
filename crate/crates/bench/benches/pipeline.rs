use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fdnet_bench::{bumps, cloud};
use fdnet_core::basis::{Basis, BasisSpec};
use fdnet_core::mlp::{train, TrainConfig};
use fdnet_core::rbfn::{train_ols, OlsConfig};
use fdnet_core::represent::{fit, loo_score};
use fdnet_core::SemiMetric;

fn representation(c: &mut Criterion) {
    let data = bumps(1, 100, 1);
    let f = &data.functions()[0];
    let basis = Basis::new(BasisSpec::bspline_uniform(0.0, 1.0, 40, 4).unwrap()).unwrap();
    c.bench_function("fit q=44 m=100", |b| b.iter(|| fit(black_box(f), &basis).unwrap()));
    c.bench_function("loo q=44 m=100", |b| b.iter(|| loo_score(black_box(f), &basis).unwrap()));
}

fn ols(c: &mut Criterion) {
    let (xs, ys) = cloud(160, 20, 2);
    let config = OlsConfig { width: 2.0, ridge: 1e-4, max_centers: 100 };
    c.bench_function("ols n=160 d=20 k=100", |b| {
        b.iter(|| train_ols(black_box(&xs), &ys, config, SemiMetric::L2).unwrap())
    });
}

fn perceptron(c: &mut Criterion) {
    let (xs, ys) = cloud(120, 10, 3);
    let config = TrainConfig { hidden: 4, decay: 1e-3, restarts: 1, max_iter: 100, seed: 4 };
    let mut group = c.benchmark_group("perceptron");
    group.sample_size(10);
    group.bench_function("lm n=120 d=10 h=4", |b| b.iter(|| train(black_box(&xs), &ys, config).unwrap()));
    group.finish();
}

criterion_group!(benches, representation, ols, perceptron);
criterion_main!(benches);
