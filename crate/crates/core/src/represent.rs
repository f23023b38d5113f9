//! Least-squares projection of sampled functions on a basis.
//!
//! A fit produces raw coordinates `alpha` and scaled coordinates
//! `beta = U alpha`, where `U` is the upper Cholesky factor of the basis Gram
//! matrix. Dot products and Euclidean distances between `beta` vectors equal
//! L² inner products and distances between the reconstructed functions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{Basis, BasisKind, BasisSpec};
use crate::error::{Error, Result};
use crate::fdata::{Dataset, SampledFunction};

/// Designs whose triangular factor exceeds this condition number are treated
/// as unidentifiable.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct Representation {
    basis: Arc<Basis>,
    alpha: DVector<f64>,
    beta: DVector<f64>,
    sse: Option<f64>,
}

impl Representation {
    pub fn from_alpha(basis: Arc<Basis>, alpha: DVector<f64>) -> Result<Self> {
        if alpha.len() != basis.dim() {
            return Err(Error::Contract(format!(
                "{} coordinates for a basis of dimension {}",
                alpha.len(),
                basis.dim()
            )));
        }
        let beta = basis.gram().scale(&alpha);
        Ok(Self {
            basis,
            alpha,
            beta,
            sse: None,
        })
    }

    pub fn from_beta(basis: Arc<Basis>, beta: DVector<f64>) -> Result<Self> {
        if beta.len() != basis.dim() {
            return Err(Error::Contract(format!(
                "{} coordinates for a basis of dimension {}",
                beta.len(),
                basis.dim()
            )));
        }
        let alpha = basis.gram().unscale(&beta);
        Ok(Self {
            basis,
            alpha,
            beta,
            sse: None,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn to_beta(&self) -> DVector<f64> {
        self.beta.clone()
    }

    /// Residual sum of squares of the fit that produced this representation.
    pub fn sse(&self) -> Option<f64> {
        self.sse
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.basis.eval(x)?.dot(&self.alpha))
    }

    pub fn same_basis(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || self.basis.spec() == other.basis.spec()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_basis(other) {
            Ok(())
        } else {
            Err(Error::Contract("representations live on different bases".into()))
        }
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.beta.dot(&other.beta))
    }

    pub fn dist(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok((&self.beta - &other.beta).norm())
    }

    pub fn norm(&self) -> f64 {
        self.beta.norm()
    }

    /// `lambda * self + mu * other`.
    pub fn combine(&self, lambda: f64, other: &Self, mu: f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            basis: Arc::clone(&self.basis),
            alpha: &self.alpha * lambda + &other.alpha * mu,
            beta: &self.beta * lambda + &other.beta * mu,
            sse: None,
        })
    }
}

/// Diagonal of the smoother matrix `S` with `fitted = S y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatDiag(pub Vec<f64>);

impl HatDiag {
    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub representation: Representation,
    pub hat: HatDiag,
    pub residuals: Vec<f64>,
}

/// Columns that cannot be estimated: empty columns first, otherwise the
/// trailing columns of a column-pivoted QR beyond the numerical rank.
fn unidentifiable_columns(design: &DMatrix<f64>) -> Vec<usize> {
    let empty: Vec<usize> = (0..design.ncols())
        .filter(|&k| design.column(k).iter().all(|v| *v == 0.0))
        .collect();
    if !empty.is_empty() {
        return empty;
    }
    let (m, q) = design.shape();
    let qr = design.clone().col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    let rank = (0..m.min(q))
        .take_while(|&k| r[(k, k)].abs() > 1e-10 * top)
        .count();
    let mut order = DMatrix::from_fn(1, q, |_, c| c as f64);
    qr.p().permute_columns(&mut order);
    let mut idx: Vec<usize> = order.iter().skip(rank).map(|v| *v as usize).collect();
    idx.sort_unstable();
    idx
}

/// Least-squares projection of `f` on `basis` through a Householder QR of
/// the design matrix, with the smoother diagonal.
pub fn fit_with_hat(f: &SampledFunction, basis: &Arc<Basis>) -> Result<Fit> {
    let xs = f.xs();
    let y = DVector::from_vec(f.ys());
    let design = basis.design(&xs)?;
    let (m, q) = design.shape();
    if m < q || design.column_iter().any(|c| c.iter().all(|v| *v == 0.0)) {
        return Err(Error::Unidentifiable {
            indices: unidentifiable_columns(&design),
        });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > MAX_CONDITION {
        if sv.min() <= 1e-10 * sv.max() {
            return Err(Error::Unidentifiable {
                indices: unidentifiable_columns(&design),
            });
        }
        return Err(Error::IllConditioned { condition });
    }
    let qmat = qr.q();
    let qty = qmat.tr_mul(&y);
    let alpha = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::Unidentifiable { indices: vec![] })?;
    let fitted = &design * &alpha;
    let residuals: Vec<f64> = (&y - &fitted).iter().copied().collect();
    let sse = residuals.iter().map(|e| e * e).sum();
    let hat = HatDiag(qmat.row_iter().map(|row| row.norm_squared()).collect());
    let mut representation = Representation::from_alpha(Arc::clone(basis), alpha)?;
    representation.sse = Some(sse);
    Ok(Fit {
        representation,
        hat,
        residuals,
    })
}

pub fn fit(f: &SampledFunction, basis: &Arc<Basis>) -> Result<Representation> {
    fit_with_hat(f, basis).map(|fit| fit.representation)
}

/// Closed-form leave-one-out score `(1/m) sum ((y_i - g(x_i)) / (1 - S_ii))^2`.
pub fn loo_score(f: &SampledFunction, basis: &Arc<Basis>) -> Result<f64> {
    let fit = fit_with_hat(f, basis)?;
    loo_from_fit(&fit)
}

fn loo_from_fit(fit: &Fit) -> Result<f64> {
    let m = fit.residuals.len();
    let mut total = 0.0;
    for (i, (e, s)) in fit.residuals.iter().zip(&fit.hat.0).enumerate() {
        if *s >= 1.0 - 1e-12 {
            return Err(Error::DegenerateLoo { index: i });
        }
        let r = e / (1.0 - s);
        total += r * r;
    }
    Ok(total / m as f64)
}

#[derive(Debug, Clone)]
pub struct CandidateScore {
    pub size: usize,
    /// Sum over functions of the leave-one-out scores, or why the candidate
    /// was skipped.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct SizeSelection {
    pub chosen: BasisSpec,
    pub scores: Vec<CandidateScore>,
}

impl SizeSelection {
    pub fn size(&self) -> usize {
        self.chosen.dim()
    }

    pub fn skipped(&self) -> impl Iterator<Item = &CandidateScore> {
        self.scores.iter().filter(|c| c.outcome.is_err())
    }
}

/// Picks the basis size minimising the summed leave-one-out score over all
/// functions of `dataset`. Candidates on which any function fails are
/// skipped; ties go to the smaller size.
pub fn select_basis_size(dataset: &Dataset, kind: BasisKind, sizes: &[usize]) -> Result<SizeSelection> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::Selection("no candidate sizes".into()));
    }
    let mut scores = Vec::with_capacity(sizes.len());
    let mut best: Option<(f64, BasisSpec)> = None;
    for size in sizes {
        let outcome = kind
            .with_size(dataset.domain(), size)
            .and_then(Basis::new)
            .and_then(|basis| total_loo(dataset, &basis))
            .map_err(|e| e.to_string());
        if let (Ok(total), Ok(spec)) = (&outcome, kind.with_size(dataset.domain(), size)) {
            if best.as_ref().is_none_or(|(b, _)| total < b) {
                best = Some((*total, spec));
            }
        }
        scores.push(CandidateScore { size, outcome });
    }
    match best {
        Some((_, chosen)) => Ok(SizeSelection { chosen, scores }),
        None => Err(Error::Selection(format!(
            "every candidate failed: {}",
            scores
                .iter()
                .map(|c| format!("q={}: {}", c.size, c.outcome.as_ref().err().map_or("", |s| s)))
                .collect::<Vec<_>>()
                .join("; ")
        ))),
    }
}

fn total_loo(dataset: &Dataset, basis: &Arc<Basis>) -> Result<f64> {
    let per_function: Vec<Result<f64>> = dataset
        .functions()
        .par_iter()
        .map(|f| {
            loo_score(f, basis).map_err(|e| Error::Selection(format!("function {}: {e}", f.id())))
        })
        .collect();
    let mut total = 0.0;
    for s in per_function {
        total += s?;
    }
    Ok(total)
}

/// Fits every function of the dataset on `basis`, in order.
pub fn fit_all(dataset: &Dataset, basis: &Arc<Basis>) -> Result<Vec<Representation>> {
    dataset
        .functions()
        .par_iter()
        .map(|f| fit(f, basis).map_err(|e| Error::Selection(format!("function {}: {e}", f.id()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdata::SampledFunction;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn cubic(l: usize) -> Arc<Basis> {
        Basis::new(BasisSpec::bspline_uniform(0.0, 1.0, l, 4).unwrap()).unwrap()
    }

    fn sampled(id: usize, xs: &[f64], g: impl Fn(f64) -> f64) -> SampledFunction {
        let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        SampledFunction::from_xy(id, xs, &ys).unwrap()
    }

    fn grid(m: usize) -> Vec<f64> {
        (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn in_span_function_is_recovered_exactly() {
        let basis = cubic(5);
        let alpha = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -1.0, 2.0, 0.25]);
        let truth = Representation::from_alpha(Arc::clone(&basis), alpha.clone()).unwrap();
        let xs = grid(40);
        let f = sampled(0, &xs, |x| truth.eval(x).unwrap());
        let r = fit(&f, &basis).unwrap();
        let y2: f64 = f.ys().iter().map(|y| y * y).sum();
        assert!(r.sse().unwrap() <= 1e-18 * y2 + 1e-28);
        assert!((r.alpha() - alpha).amax() < 1e-10);
        for &x in &xs {
            assert!((r.eval(x).unwrap() - truth.eval(x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_samples_give_constant_coordinates() {
        let basis = cubic(6);
        let f = sampled(0, &grid(25), |_| 4.2);
        let r = fit(&f, &basis).unwrap();
        assert!(r.alpha().iter().all(|a| (a - 4.2).abs() < 1e-12));
    }

    #[test]
    fn empty_support_names_the_coefficient() {
        let basis = cubic(6);
        // no samples in the last knot interval -> last spline unsupported
        let xs: Vec<f64> = (0..30).map(|j| j as f64 / 29.0 * 0.8).collect();
        let f = sampled(0, &xs, |x| x.sin());
        match fit(&f, &basis) {
            Err(Error::Unidentifiable { indices }) => assert_eq!(indices, vec![9]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_samples_is_unidentifiable() {
        let basis = cubic(6);
        let f = sampled(0, &grid(5), |x| x);
        assert!(matches!(fit(&f, &basis), Err(Error::Unidentifiable { .. })));
    }

    #[test]
    fn square_design_gives_degenerate_loo() {
        let basis = cubic(4);
        let f = sampled(0, &grid(8), |x| (3.0 * x).cos());
        assert!(matches!(loo_score(&f, &basis), Err(Error::DegenerateLoo { .. })));
    }

    #[test]
    fn hat_diagonal_trace_and_bounds() {
        let basis = cubic(7);
        let f = sampled(0, &grid(50), |x| (5.0 * x).sin());
        let fit = fit_with_hat(&f, &basis).unwrap();
        assert!((fit.hat.trace() - basis.dim() as f64).abs() < 1e-8);
        assert!(fit.hat.0.iter().all(|s| *s >= -1e-10 && *s <= 1.0 + 1e-10));
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let basis = cubic(6);
        let f = sampled(0, &grid(60), |x| (7.0 * x).sin() + x * x);
        let fit = fit_with_hat(&f, &basis).unwrap();
        let design = basis.design(&f.xs()).unwrap();
        let e = DVector::from_vec(fit.residuals.clone());
        let y = DVector::from_vec(f.ys());
        assert!((design.transpose() * e).amax() < 1e-9 * y.norm());
    }

    #[test]
    fn fourier_beta_equals_alpha() {
        let basis = Basis::new(BasisSpec::fourier(0.0, 1.0, 7).unwrap()).unwrap();
        let f = sampled(0, &grid(30), |x| (2.0 * std::f64::consts::PI * x).cos() + 0.3);
        let r = fit(&f, &basis).unwrap();
        assert!((r.alpha() - r.beta()).amax() < 1e-14);
    }

    #[test]
    fn distance_to_self_and_basis_mismatch() {
        let f = sampled(0, &grid(30), |x| x * x);
        let r = fit(&f, &cubic(4)).unwrap();
        assert_eq!(r.dist(&r).unwrap(), 0.0);
        let other = fit(&f, &cubic(5)).unwrap();
        assert!(matches!(r.inner(&other), Err(Error::Contract(_))));
    }

    #[test]
    fn single_candidate_is_returned() {
        let d = Dataset::new(vec![sampled(0, &grid(30), |x| x.exp())], vec![1.0], (0.0, 1.0)).unwrap();
        let sel = select_basis_size(&d, BasisKind::BSpline { order: 4 }, &[9]).unwrap();
        assert_eq!(sel.size(), 9);
    }

    #[test]
    fn all_candidates_infeasible_is_an_error() {
        let d = Dataset::new(vec![sampled(0, &grid(6), |x| x)], vec![1.0], (0.0, 1.0)).unwrap();
        assert!(matches!(
            select_basis_size(&d, BasisKind::BSpline { order: 4 }, &[6, 8, 10]),
            Err(Error::Selection(_))
        ));
    }

    #[test]
    fn selection_skips_infeasible_and_prefers_the_truth() {
        // truth: cubic spline with 5 interior knots; noisy samples
        let truth_basis = cubic(5);
        let mut rng = seed::rng(9);
        let functions: Vec<_> = (0..6)
            .map(|i| {
                let alpha = DVector::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
                let r = Representation::from_alpha(Arc::clone(&truth_basis), alpha).unwrap();
                let xs = grid(80);
                let ys: Vec<f64> = xs.iter().map(|&x| r.eval(x).unwrap() + 0.01 * rng.random_range(-1.0..1.0)).collect();
                SampledFunction::from_xy(i, &xs, &ys).unwrap()
            })
            .collect();
        let d = Dataset::new(functions, vec![0.0; 6], (0.0, 1.0)).unwrap();
        let sel = select_basis_size(&d, BasisKind::BSpline { order: 4 }, &[6, 9, 14, 24, 90]).unwrap();
        assert_eq!(sel.size(), 9);
        assert_eq!(sel.skipped().map(|c| c.size).collect::<Vec<_>>(), vec![90]);
    }

    proptest! {
        #[test]
        fn coordinates_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let basis = cubic(5);
            let xs = grid(40);
            let u = sampled(0, &xs, |x| (4.0 * x).sin());
            let v = sampled(1, &xs, |x| x * x * x - x);
            let w = sampled(2, &xs, |x| a * (4.0 * x).sin() + b * (x * x * x - x));
            let (ru, rv, rw) = (fit(&u, &basis).unwrap(), fit(&v, &basis).unwrap(), fit(&w, &basis).unwrap());
            let combo = ru.combine(a, &rv, b).unwrap();
            prop_assert!((combo.beta() - rw.beta()).amax() < 1e-10 * (1.0 + rw.beta().amax()));
        }
    }
}
