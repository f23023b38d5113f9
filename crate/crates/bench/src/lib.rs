//! Shared fixtures for the benchmarks.

use fdnet_core::{seed, Dataset, DVector, SampledFunction};
use rand::Rng;

/// `n` noisy bumps on a regular grid of `m` points in `[0, 1]`.
pub fn bumps(n: usize, m: usize, seed_value: u64) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let xs: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
    let mut functions = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let height = rng.random_range(0.5..2.0);
        let centre = rng.random_range(0.3..0.7);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| height * (-(x - centre).powi(2) / 0.02).exp() + 0.3 * x + rng.random_range(-0.01..0.01))
            .collect();
        functions.push(SampledFunction::from_xy(i, &xs, &ys).expect("valid samples"));
        targets.push(3.0 * height + 4.0 * centre);
    }
    Dataset::new(functions, targets, (0.0, 1.0)).expect("valid dataset")
}

/// `n` random points in `[-1, 1]^d` with a smooth target.
pub fn cloud(n: usize, d: usize, seed_value: u64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut rng = seed::rng(seed_value);
    let xs: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))).collect();
    let ys = xs.iter().map(|x| (2.0 * x[0]).sin() + x.norm_squared() / d as f64).collect();
    (xs, ys)
}
