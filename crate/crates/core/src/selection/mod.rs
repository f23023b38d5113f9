//! Cross-validation harness, experiment specifications, the end-to-end
//! pipeline and its reports.

mod pipeline;
mod report;
mod spec;
mod suite;

use nalgebra::DVector;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

pub use pipeline::{run_experiment, run_on_dataset, BasisCache, IsolatedTestSet};
pub use report::{write_csv, write_text, write_timings, ExperimentReport};
pub use spec::{Components, ExperimentSpec, Impute, InputKind, KChoice, ModelKind, PcaKind, Preproc, SizeChoice};
pub use suite::{suite, DEFAULT_DROP_FRACTION, SUITES};

/// Disjoint folds covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    seed: u64,
}

/// Shuffles `0..n` with `seed`, then cuts it into `k` contiguous chunks
/// whose sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || k > n {
        return Err(Error::Argument(format!("cannot make {k} folds from {n} samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldPlan { folds, seed })
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn validation(&self, f: usize) -> &[usize] {
        &self.folds[f]
    }

    /// Every index outside fold `f`, ascending.
    pub fn training(&self, f: usize) -> Vec<usize> {
        let mut t: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        t.sort_unstable();
        t
    }
}

/// Model inputs and targets of one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train_x: Vec<DVector<f64>>,
    pub train_y: Vec<f64>,
    pub val_x: Vec<DVector<f64>>,
    pub val_y: Vec<f64>,
}

impl FoldData {
    /// Same fold restricted to the first `k` input coordinates.
    pub fn truncated(&self, k: usize) -> Result<FoldData> {
        let dim = self.train_x.first().map_or(0, |x| x.len());
        if k == 0 || k > dim {
            return Err(Error::Argument(format!("cannot keep {k} of {dim} input coordinates")));
        }
        if k == dim {
            return Ok(self.clone());
        }
        let cut = |v: &[DVector<f64>]| v.iter().map(|x| x.rows(0, k).clone_owned()).collect();
        Ok(FoldData {
            train_x: cut(&self.train_x),
            train_y: self.train_y.clone(),
            val_x: cut(&self.val_x),
            val_y: self.val_y.clone(),
        })
    }

    pub fn validation_mse(&self, predict: impl Fn(&DVector<f64>) -> Result<f64>) -> Result<f64> {
        let mut sse = 0.0;
        for (x, y) in self.val_x.iter().zip(&self.val_y) {
            sse += (predict(x)? - y).powi(2);
        }
        Ok(sse / self.val_y.len() as f64)
    }
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> f64 {
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    (sse / targets.len() as f64).sqrt()
}

/// Index of the smallest score; the first one wins ties, so callers list
/// cells in lexicographic order.
pub fn grid_argmin(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .fold(None, |best: Option<usize>, (i, s)| match best {
            Some(b) if *s >= scores[b] => best,
            _ => Some(i),
        })
}
