//! One-hidden-layer tanh perceptron with a linear output unit, trained by
//! Levenberg-Marquardt on the weight-decayed least-squares loss
//! `sum_i (f(x_i) - y_i)^2 + decay * sum(non-bias weights^2)`.
//!
//! Parameters are stored flat: for each hidden unit `h`, its input weights
//! `v_h` followed by its bias `b_h`; then the output weights `w_0..w_{H-1}`;
//! then the output bias `c`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use crate::selection::FoldData;

pub const MAX_HIDDEN: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden: usize,
    params: DVector<f64>,
    decay: f64,
}

pub fn param_count(input_dim: usize, hidden: usize) -> usize {
    hidden * (input_dim + 2) + 1
}

impl MlpModel {
    pub fn from_params(input_dim: usize, hidden: usize, params: DVector<f64>, decay: f64) -> Result<Self> {
        if !(1..=MAX_HIDDEN).contains(&hidden) {
            return Err(Error::Argument(format!("hidden units must be in 1..={MAX_HIDDEN}, got {hidden}")));
        }
        if params.len() != param_count(input_dim, hidden) {
            return Err(Error::Contract(format!(
                "{} parameters for a {input_dim}-{hidden}-1 network",
                params.len()
            )));
        }
        if decay < 0.0 {
            return Err(Error::Argument(format!("decay must be non-negative, got {decay}")));
        }
        Ok(Self {
            input_dim,
            hidden,
            params,
            decay,
        })
    }

    /// Random weights uniform in `[-0.7, 0.7] / sqrt(fan_in)`.
    pub fn random(input_dim: usize, hidden: usize, decay: f64, rng: &mut impl Rng) -> Result<Self> {
        let hidden_scale = 0.7 / (input_dim.max(1) as f64).sqrt();
        let out_scale = 0.7 / (hidden as f64).sqrt();
        let split = hidden * (input_dim + 1);
        let params = DVector::from_fn(param_count(input_dim, hidden), |k, _| {
            let s = if k < split { hidden_scale } else { out_scale };
            rng.random_range(-s..=s)
        });
        Self::from_params(input_dim, hidden, params, decay)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn params(&self) -> &DVector<f64> {
        &self.params
    }

    /// True for the positions of `b_h` and `c`.
    pub fn is_bias(&self, k: usize) -> bool {
        let d = self.input_dim;
        let split = self.hidden * (d + 1);
        if k < split {
            k % (d + 1) == d
        } else {
            k == self.params.len() - 1
        }
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Contract(format!(
                "input of dimension {} for a network expecting {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// `c + sum_h w_h tanh(b_h + v_h^T x)`.
    pub fn forward(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval(x, None))
    }

    /// Output, writing the Jacobian row `df/dparams` into `jac` if given.
    fn eval(&self, x: &DVector<f64>, mut jac: Option<&mut [f64]>) -> f64 {
        let d = self.input_dim;
        let p = &self.params;
        let out_base = self.hidden * (d + 1);
        let mut out = p[p.len() - 1];
        for h in 0..self.hidden {
            let base = h * (d + 1);
            let a = p[base + d] + p.rows(base, d).dot(x);
            let t = a.tanh();
            let w = p[out_base + h];
            out += w * t;
            if let Some(j) = jac.as_deref_mut() {
                let g = w * (1.0 - t * t);
                for i in 0..d {
                    j[base + i] = g * x[i];
                }
                j[base + d] = g;
                j[out_base + h] = t;
            }
        }
        if let Some(j) = jac {
            j[p.len() - 1] = 1.0;
        }
        out
    }

    fn penalty_mask(&self) -> DVector<f64> {
        DVector::from_fn(self.params.len(), |k, _| if self.is_bias(k) { 0.0 } else { 1.0 })
    }

    /// Sum of squared errors plus the decay term.
    pub fn loss(&self, xs: &[DVector<f64>], ys: &[f64]) -> Result<f64> {
        let mut sse = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            self.check(x)?;
            sse += (self.eval(x, None) - y).powi(2);
        }
        Ok(sse + self.decay * self.params.component_mul(&self.penalty_mask()).norm_squared())
    }

    /// Analytic gradient of [`MlpModel::loss`]: `2 J^T r + 2 decay D p`.
    pub fn gradient(&self, xs: &[DVector<f64>], ys: &[f64]) -> Result<DVector<f64>> {
        for x in xs {
            self.check(x)?;
        }
        let (jac, r) = self.jacobian(xs, ys);
        Ok((jac.tr_mul(&r) + self.params.component_mul(&self.penalty_mask()) * self.decay) * 2.0)
    }

    /// Gradient of the decay term alone.
    pub fn penalty_gradient(&self) -> DVector<f64> {
        self.params.component_mul(&self.penalty_mask()) * (2.0 * self.decay)
    }

    fn jacobian(&self, xs: &[DVector<f64>], ys: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let np = self.params.len();
        let mut jac = DMatrix::zeros(xs.len(), np);
        let mut r = DVector::zeros(xs.len());
        let mut row = vec![0.0; np];
        for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
            r[i] = self.eval(x, Some(&mut row)) - y;
            for (k, v) in row.iter().enumerate() {
                jac[(i, k)] = *v;
            }
        }
        (jac, r)
    }
}

/// A trained model and its loss after every accepted step.
pub type Run = (MlpModel, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub decay: f64,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub best_restart: usize,
    /// Final regularized loss of each restart, `None` when it diverged.
    pub restart_losses: Vec<Option<f64>>,
    /// Loss after every accepted step of the kept restart, starting at the
    /// initial loss.
    pub history: Vec<f64>,
}

/// Levenberg-Marquardt from `start`. Returns the final model and the loss
/// after every accepted step; `None` when the loss becomes non-finite.
pub fn optimize(start: MlpModel, xs: &[DVector<f64>], ys: &[f64], max_iter: usize) -> Result<Option<Run>> {
    let mut model = start;
    let mask = model.penalty_mask();
    let decay = model.decay;
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1.0);
    let mut loss = model.loss(xs, ys)?;
    if !loss.is_finite() {
        return Ok(None);
    }
    let mut history = vec![loss];
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        let (jac, r) = model.jacobian(xs, ys);
        let grad = jac.tr_mul(&r) + model.params.component_mul(&mask) * decay;
        if !grad.iter().all(|g| g.is_finite()) {
            return Ok(None);
        }
        if 2.0 * grad.norm() < 1e-8 * scale {
            break;
        }
        let mut normal = jac.tr_mul(&jac);
        for k in 0..normal.nrows() {
            normal[(k, k)] += decay * mask[k];
        }
        let mut accepted = false;
        while mu < 1e12 {
            let mut damped = normal.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += mu * (1.0 + normal[(k, k)]);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial = MlpModel {
                params: &model.params + step,
                ..model.clone()
            };
            let trial_loss = trial.loss(xs, ys)?;
            if trial_loss.is_finite() && trial_loss < loss {
                model = trial;
                loss = trial_loss;
                history.push(loss);
                mu = (mu * 0.1).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(Some((model, history)))
}

/// Multi-restart training; keeps the restart with the lowest regularized
/// training loss. Restart `r` draws its initial weights from a generator
/// seeded with `derive(seed, "mlp-restart", r)`.
pub fn train(xs: &[DVector<f64>], ys: &[f64], config: TrainConfig) -> Result<TrainOutcome> {
    if config.restarts == 0 {
        return Err(Error::Argument("at least one restart is required".into()));
    }
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Contract(format!("{} inputs for {} targets", xs.len(), ys.len())));
    }
    let d = xs[0].len();
    let runs: Vec<Result<Option<Run>>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive(config.seed, "mlp-restart", r as u64));
            let start = MlpModel::random(d, config.hidden, config.decay, &mut rng)?;
            optimize(start, xs, ys, config.max_iter)
        })
        .collect();
    let mut restart_losses = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, MlpModel, Vec<f64>)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run? {
            Some((model, history)) => {
                let loss = *history.last().expect("history starts with the initial loss");
                restart_losses.push(Some(loss));
                if best.as_ref().is_none_or(|(_, _, h)| loss < *h.last().unwrap()) {
                    best = Some((r, model, history));
                }
            }
            None => {
                log::warn!("restart {r} diverged and was discarded");
                restart_losses.push(None);
            }
        }
    }
    let (best_restart, model, history) = best.ok_or_else(|| Error::Training("every restart diverged".into()))?;
    Ok(TrainOutcome {
        model,
        best_restart,
        restart_losses,
        history,
    })
}

/// A network trained on standardized targets, predicting in target units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMlp {
    pub model: MlpModel,
    pub mean: f64,
    pub sd: f64,
}

impl ScaledMlp {
    pub fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.mean + self.sd * self.model.forward(x)?)
    }
}

/// [`train`] on `(y - mean) / sd` of the training targets.
pub fn train_scaled(xs: &[DVector<f64>], ys: &[f64], config: TrainConfig) -> Result<(ScaledMlp, TrainOutcome)> {
    let n = ys.len().max(1) as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let scaled: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
    let outcome = train(xs, &scaled, config)?;
    Ok((
        ScaledMlp {
            model: outcome.model.clone(),
            mean,
            sd,
        },
        outcome,
    ))
}

/// One cell of the meta-parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MetaCell {
    pub components: usize,
    pub hidden: usize,
    pub decay: f64,
}

#[derive(Debug, Clone)]
pub struct MetaSelection {
    pub best: MetaCell,
    pub score: f64,
    /// Every cell with its mean validation mean squared error.
    pub table: Vec<(MetaCell, f64)>,
}

#[derive(Debug, Clone)]
pub struct MetaGrid {
    pub components: Vec<usize>,
    pub hidden: Vec<usize>,
    pub decay: Vec<f64>,
    pub restarts: usize,
    pub max_iter: usize,
}

/// Joint cross-validated choice of input dimension, hidden units and decay.
/// Fold inputs hold the maximal number of components; a cell with `k`
/// components uses the first `k` coordinates. Ties go to the first cell in
/// lexicographic (components, hidden, decay) order.
pub fn select_meta(folds: &[FoldData], grid: &MetaGrid, seed: u64) -> Result<MetaSelection> {
    if folds.is_empty() || grid.components.is_empty() || grid.hidden.is_empty() || grid.decay.is_empty() {
        return Err(Error::Argument("empty fold list or meta-parameter grid".into()));
    }
    let mut cells = Vec::new();
    for &components in &grid.components {
        for &hidden in &grid.hidden {
            for &decay in &grid.decay {
                cells.push(MetaCell {
                    components,
                    hidden,
                    decay,
                });
            }
        }
    }
    cells.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let scores: Vec<Result<f64>> = cells
        .par_iter()
        .map(|cell| {
            let mut total = 0.0;
            for (f, fold) in folds.iter().enumerate() {
                let fold = fold.truncated(cell.components)?;
                let (net, _) = train_scaled(
                    &fold.train_x,
                    &fold.train_y,
                    TrainConfig {
                        hidden: cell.hidden,
                        decay: cell.decay,
                        restarts: grid.restarts,
                        max_iter: grid.max_iter,
                        seed: seed::derive(seed, "mlp-fold", f as u64),
                    },
                )?;
                total += fold.validation_mse(|x| net.predict(x))?;
            }
            Ok(total / folds.len() as f64)
        })
        .collect();
    let mut table = Vec::with_capacity(cells.len());
    for (cell, score) in cells.into_iter().zip(scores) {
        table.push((cell, score?));
    }
    let (best, score) = table
        .iter()
        .fold(None::<(MetaCell, f64)>, |acc, &(c, s)| match acc {
            Some((_, b)) if s >= b => acc,
            _ => Some((c, s)),
        })
        .expect("non-empty grid");
    Ok(MetaSelection { best, score, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, d: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let xs: Vec<_> = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5))).collect();
        let ys = xs.iter().map(|x| (x[0] * 1.3f64).tanh() - 0.5 * x.sum() + 0.05 * rng.random_range(-1.0..1.0)).collect();
        (xs, ys)
    }

    fn finite_difference(model: &MlpModel, xs: &[DVector<f64>], ys: &[f64]) -> DVector<f64> {
        DVector::from_fn(model.params().len(), |k, _| {
            let h = 1e-5 * (1.0 + model.params()[k].abs());
            let mut plus = model.clone();
            plus.params[k] += h;
            let mut minus = model.clone();
            minus.params[k] -= h;
            (plus.loss(xs, ys).unwrap() - minus.loss(xs, ys).unwrap()) / (2.0 * h)
        })
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = MlpModel::from_params(3, 2, DVector::zeros(param_count(3, 2)), 0.0).unwrap();
        assert_eq!(m.forward(&DVector::from_vec(vec![1.0, -2.0, 3.0])).unwrap(), 0.0);
    }

    #[test]
    fn zero_input_weights_give_a_constant() {
        let mut p = DVector::zeros(param_count(2, 2));
        // b_0, b_1, w_0, w_1, c
        p[2] = 0.3;
        p[5] = -1.1;
        p[6] = 2.0;
        p[7] = 0.5;
        p[8] = 0.25;
        let m = MlpModel::from_params(2, 2, p, 0.0).unwrap();
        let expect = 0.25 + 2.0 * 0.3f64.tanh() + 0.5 * (-1.1f64).tanh();
        for x in data(5, 2, 1).0 {
            assert!((m.forward(&x).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::random(3, 1, 0.0, &mut seed::rng(1)).unwrap();
        assert!(matches!(m.forward(&DVector::zeros(4)), Err(Error::Contract(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        for case in 0..20u64 {
            let mut rng = seed::rng(100 + case);
            let d = rng.random_range(1..5);
            let h = rng.random_range(1..=MAX_HIDDEN);
            let decay = [0.0, 0.01, 1.0][case as usize % 3];
            let (xs, ys) = data(15, d, case);
            let m = MlpModel::random(d, h, decay, &mut rng).unwrap();
            let g = m.gradient(&xs, &ys).unwrap();
            let fd = finite_difference(&m, &xs, &ys);
            let scale = g.amax().max(1e-3);
            assert!((&g - &fd).amax() / scale < 1e-6, "case {case}: {:e}", (&g - &fd).amax() / scale);
        }
    }

    #[test]
    fn decay_ignores_biases() {
        let m = MlpModel::random(3, 4, 2.0, &mut seed::rng(5)).unwrap();
        let g = m.penalty_gradient();
        for k in 0..g.len() {
            if m.is_bias(k) {
                assert_eq!(g[k], 0.0);
            } else {
                assert_eq!(g[k], 4.0 * m.params()[k]);
            }
        }
        assert_eq!((0..g.len()).filter(|&k| m.is_bias(k)).count(), 5);
    }

    #[test]
    fn accepted_steps_never_increase_the_loss() {
        let (xs, ys) = data(40, 3, 6);
        let m = MlpModel::random(3, 3, 0.01, &mut seed::rng(7)).unwrap();
        let (_, history) = optimize(m, &xs, &ys, 200).unwrap().unwrap();
        assert!(history.len() > 2);
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn best_restart_is_the_minimum() {
        let (xs, ys) = data(30, 2, 8);
        let out = train(&xs, &ys, TrainConfig { hidden: 2, decay: 0.001, restarts: 6, max_iter: 100, seed: 3 }).unwrap();
        let best = out.model.loss(&xs, &ys).unwrap();
        for l in out.restart_losses.iter().flatten() {
            assert!(best <= *l);
        }
        assert_eq!(out.restart_losses[out.best_restart], Some(best));
    }

    #[test]
    fn heavy_decay_predicts_the_mean() {
        let (xs, ys) = data(30, 2, 9);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let out = train(&xs, &ys, TrainConfig { hidden: 3, decay: 1e6, restarts: 2, max_iter: 500, seed: 4 }).unwrap();
        let m = &out.model;
        for k in 0..m.params().len() {
            if !m.is_bias(k) {
                assert!(m.params()[k].abs() < 1e-3);
            }
        }
        for x in &xs {
            assert!((m.forward(x).unwrap() - mean).abs() < 1e-3);
        }
    }

    #[test]
    fn hidden_units_commute() {
        let (d, h) = (3, 4);
        let m = MlpModel::random(d, h, 0.0, &mut seed::rng(10)).unwrap();
        let perm = [2, 0, 3, 1];
        let p = m.params();
        let mut q = p.clone();
        for (new, &old) in perm.iter().enumerate() {
            for i in 0..=d {
                q[new * (d + 1) + i] = p[old * (d + 1) + i];
            }
            q[h * (d + 1) + new] = p[h * (d + 1) + old];
        }
        let m2 = MlpModel::from_params(d, h, q, 0.0).unwrap();
        for x in data(10, d, 11).0 {
            assert!((m.forward(&x).unwrap() - m2.forward(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = data(20, 2, 12);
        let c = TrainConfig { hidden: 2, decay: 0.01, restarts: 3, max_iter: 50, seed: 9 };
        assert_eq!(train(&xs, &ys, c).unwrap().model, train(&xs, &ys, c).unwrap().model);
    }
}
