//! Gaussian RBF networks trained by regularized orthogonal least squares.
//!
//! Candidate centers are the training inputs. At every step each remaining
//! candidate column `p_j` of the Gaussian design is orthogonalised against the
//! already selected columns, giving `w_j`, and the candidate with the largest
//! reduction `(w_j^T y)^2 / (w_j^T w_j + ridge)` of the regularized error
//! `||y - W g||^2 + ridge ||g||^2` is appended. Weights in the original basis
//! come from `A theta = g`, where `P_sel = W A` with `A` unit upper triangular.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::represent::Representation;
use crate::selection::FoldData;
use crate::transforms::SemiMetric;

#[derive(Debug, Clone)]
pub struct RbfnModel {
    centers: Vec<DVector<f64>>,
    width: f64,
    weights: Vec<f64>,
    metric: SemiMetric,
    ridge: f64,
}

fn gaussian(d2: f64, width: f64) -> f64 {
    (-d2 / (2.0 * width * width)).exp()
}

impl RbfnModel {
    pub fn new(centers: Vec<DVector<f64>>, width: f64, weights: Vec<f64>, metric: SemiMetric, ridge: f64) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::Contract(format!(
                "{} centers but {} weights",
                centers.len(),
                weights.len()
            )));
        }
        if !(width > 0.0) {
            return Err(Error::Argument(format!("width must be positive, got {width}")));
        }
        if ridge < 0.0 {
            return Err(Error::Argument(format!("ridge must be non-negative, got {ridge}")));
        }
        if let Some(c) = centers.first() {
            if centers.iter().any(|d| d.len() != c.len()) {
                return Err(Error::Contract("centers of unequal dimension".into()));
            }
        }
        Ok(Self {
            centers,
            width,
            weights,
            metric,
            ridge,
        })
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn metric(&self) -> SemiMetric {
        self.metric
    }

    /// `sum_i w_i exp(-||x - c_i||^2 / (2 width^2))` on embedded coordinates.
    pub fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        let mut out = 0.0;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            if c.len() != x.len() {
                return Err(Error::Contract(format!(
                    "input of dimension {} for centers of dimension {}",
                    x.len(),
                    c.len()
                )));
            }
            out += w * gaussian((x - c).norm_squared(), self.width);
        }
        Ok(out)
    }

    /// Prediction for a function, embedded through the model's metric.
    pub fn predict_function(&self, r: &Representation) -> Result<f64> {
        self.predict(&self.metric.embed(r)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsConfig {
    pub width: f64,
    pub ridge: f64,
    pub max_centers: usize,
}

/// Forward-selection path: the first `k` entries define the `k`-center model.
#[derive(Debug, Clone)]
pub struct OlsPath {
    inputs: Vec<DVector<f64>>,
    selected: Vec<usize>,
    /// Regularized error after 0, 1, .. selections.
    criterion: Vec<f64>,
    reductions: Vec<f64>,
    /// Unit upper triangular `A` (selected x selected).
    coupling: DMatrix<f64>,
    /// Orthogonal-space weights `g`.
    ortho_weights: Vec<f64>,
    config: OlsConfig,
    metric: SemiMetric,
}

impl OlsPath {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Training indices of the selected centers, in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn criterion(&self) -> &[f64] {
        &self.criterion
    }

    pub fn reductions(&self) -> &[f64] {
        &self.reductions
    }

    pub fn config(&self) -> OlsConfig {
        self.config
    }

    /// Weights of the `k`-center model.
    pub fn weights(&self, k: usize) -> Vec<f64> {
        let a = self.coupling.view((0, 0), (k, k)).clone_owned();
        let g = DVector::from_column_slice(&self.ortho_weights[..k]);
        a.solve_upper_triangular(&g)
            .expect("unit triangular coupling")
            .iter()
            .copied()
            .collect()
    }

    pub fn model(&self, k: usize) -> Result<RbfnModel> {
        if k > self.len() {
            return Err(Error::Argument(format!("path has only {} centers", self.len())));
        }
        RbfnModel::new(
            self.selected[..k].iter().map(|&i| self.inputs[i].clone()).collect(),
            self.config.width,
            self.weights(k),
            self.metric,
            self.config.ridge,
        )
    }

    /// Mean squared error on `(xs, ys)` of every truncation, index `k - 1`
    /// holding the `k`-center model.
    pub fn validation_curve(&self, xs: &[DVector<f64>], ys: &[f64]) -> Vec<f64> {
        let k_max = self.len();
        let design = DMatrix::from_fn(xs.len(), k_max, |i, j| {
            gaussian((&xs[i] - &self.inputs[self.selected[j]]).norm_squared(), self.config.width)
        });
        (1..=k_max)
            .map(|k| {
                let theta = DVector::from_vec(self.weights(k));
                let pred = design.columns(0, k) * theta;
                pred.iter().zip(ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / ys.len() as f64
            })
            .collect()
    }
}

/// Gaussian design matrix between `rows` and `centers`.
pub fn design_matrix(rows: &[DVector<f64>], centers: &[DVector<f64>], width: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), centers.len(), |i, j| {
        gaussian((&rows[i] - &centers[j]).norm_squared(), width)
    })
}

/// Runs regularized OLS forward selection up to `config.max_centers` centers.
pub fn train_ols(inputs: &[DVector<f64>], targets: &[f64], config: OlsConfig, metric: SemiMetric) -> Result<OlsPath> {
    let all: Vec<usize> = (0..inputs.len()).collect();
    train_ols_candidates(inputs, targets, &all, config, metric)
}

/// [`train_ols`] restricted to the training inputs at positions `candidates`.
pub fn train_ols_candidates(
    inputs: &[DVector<f64>],
    targets: &[f64],
    candidates: &[usize],
    config: OlsConfig,
    metric: SemiMetric,
) -> Result<OlsPath> {
    let n = inputs.len();
    if n != targets.len() {
        return Err(Error::Contract(format!("{n} inputs but {} targets", targets.len())));
    }
    if candidates.iter().any(|&c| c >= n) {
        return Err(Error::Argument("candidate index outside the training set".into()));
    }
    if config.max_centers > candidates.len() {
        return Err(Error::Argument(format!(
            "max_centers {} exceeds the {} candidates",
            config.max_centers,
            candidates.len()
        )));
    }
    if !(config.width > 0.0) || config.ridge < 0.0 {
        return Err(Error::Argument("width must be positive and ridge non-negative".into()));
    }
    let y = DVector::from_column_slice(targets);
    let centers: Vec<DVector<f64>> = candidates.iter().map(|&c| inputs[c].clone()).collect();
    let m = candidates.len();
    let mut resid = design_matrix(inputs, &centers, config.width);
    let energy0: Vec<f64> = resid.column_iter().map(|c| c.norm_squared()).collect();
    let mut alive = vec![true; m];
    let mut coef = DMatrix::zeros(config.max_centers, m);
    let mut selected = Vec::with_capacity(config.max_centers);
    let mut ortho_weights = Vec::with_capacity(config.max_centers);
    let mut reductions = Vec::with_capacity(config.max_centers);
    let mut criterion = vec![y.norm_squared()];

    for step in 0..config.max_centers {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !alive[j] {
                continue;
            }
            let w = resid.column(j);
            let e = w.norm_squared();
            if e < 1e-12 * energy0[j] {
                alive[j] = false;
                continue;
            }
            let wy = w.dot(&y);
            let red = wy * wy / (e + config.ridge);
            if best.is_none_or(|(_, b)| red > b * (1.0 + 1e-12)) {
                best = Some((j, red));
            }
        }
        let Some((j, red)) = best else {
            log::warn!("OLS stopped after {step} centers: no candidate with usable energy left");
            break;
        };
        alive[j] = false;
        let w = resid.column(j).clone_owned();
        let ww = w.norm_squared();
        ortho_weights.push(w.dot(&y) / (ww + config.ridge));
        reductions.push(red);
        criterion.push(criterion[step] - red);
        selected.push(j);
        for c in 0..m {
            if alive[c] {
                let proj = w.dot(&resid.column(c)) / ww;
                coef[(step, c)] = proj;
                resid.column_mut(c).axpy(-proj, &w, 1.0);
            }
        }
    }

    let k = selected.len();
    let mut coupling = DMatrix::identity(k, k);
    for (col, &j) in selected.iter().enumerate() {
        for row in 0..col {
            coupling[(row, col)] = coef[(row, j)];
        }
    }
    let selected = selected.into_iter().map(|j| candidates[j]).collect();
    Ok(OlsPath {
        inputs: inputs.to_vec(),
        selected,
        criterion,
        reductions,
        coupling,
        ortho_weights,
        config,
        metric,
    })
}

/// Median of the pairwise Euclidean distances.
pub fn median_pairwise_distance(inputs: &[DVector<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(inputs.len() * inputs.len().saturating_sub(1) / 2);
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            d.push((&inputs[i] - &inputs[j]).norm());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    if d.len().is_multiple_of(2) {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    }
}

#[derive(Debug, Clone)]
pub struct CenterSelection {
    pub count: usize,
    /// Mean over folds of the validation mean squared error, per center count.
    pub cv_curve: Vec<f64>,
}

/// Cross-validated center count for one (width multiplier, ridge) cell: the
/// width of each fold is `multiplier * median pairwise distance` of its
/// training part. Each fold's path is computed once and every truncation is
/// scored.
pub fn select_centers(folds: &[FoldData], multiplier: f64, ridge: f64, max_centers: usize, metric: SemiMetric) -> Result<CenterSelection> {
    if folds.is_empty() {
        return Err(Error::Argument("no folds".into()));
    }
    let mut curves = Vec::with_capacity(folds.len());
    for fold in folds {
        let width = multiplier * median_pairwise_distance(&fold.train_x);
        let cap = max_centers.min(fold.train_x.len());
        let path = train_ols(
            &fold.train_x,
            &fold.train_y,
            OlsConfig {
                width: if width > 0.0 { width } else { multiplier },
                ridge,
                max_centers: cap,
            },
            metric,
        )?;
        curves.push(path.validation_curve(&fold.val_x, &fold.val_y));
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::Training("no center could be selected".into()));
    }
    let cv_curve: Vec<f64> = (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect();
    let count = argmin(&cv_curve) + 1;
    Ok(CenterSelection { count, cv_curve })
}

/// First index of the minimum.
pub(crate) fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, x)| if *x < v[best] { i } else { best })
}
