//! B-spline and Fourier bases, their Gram matrices and derivative maps.
//!
//! B-splines use a clamped knot sequence: the domain bounds are repeated
//! `order` times, so `l` interior knots give `l + order` functions that span
//! every spline of that order on `[a, b]` and sum to one everywhere.
//! The Fourier basis is orthonormal on `[a, b]`: a constant `1/sqrt(b - a)`
//! followed by sine/cosine pairs scaled by `sqrt(2 / (b - a))`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    a: f64,
    b: f64,
    interior: Vec<f64>,
    order: usize,
}

impl KnotVector {
    pub fn new(a: f64, b: f64, interior: Vec<f64>, order: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Argument(format!("empty interval [{a}, {b}]")));
        }
        if order == 0 {
            return Err(Error::Argument("spline order must be at least 1".into()));
        }
        let mut prev = a;
        for &t in &interior {
            if !(t > prev && t < b) {
                return Err(Error::Argument(format!(
                    "interior knots must increase strictly inside ({a}, {b})"
                )));
            }
            prev = t;
        }
        Ok(Self {
            a,
            b,
            interior,
            order,
        })
    }

    /// `count` interior knots at `a + k (b - a) / (count + 1)`.
    pub fn uniform(a: f64, b: f64, count: usize, order: usize) -> Result<Self> {
        let h = (b - a) / (count + 1) as f64;
        Self::new(a, b, (1..=count).map(|k| a + k as f64 * h).collect(), order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn dim(&self) -> usize {
        self.interior.len() + self.order
    }

    /// `a`, the interior knots, then `b`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.interior.len() + 2);
        v.push(self.a);
        v.extend_from_slice(&self.interior);
        v.push(self.b);
        v
    }

    /// Clamped sequence of length `dim() + order`.
    pub fn augmented(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.dim() + self.order);
        t.extend(std::iter::repeat_n(self.a, self.order));
        t.extend_from_slice(&self.interior);
        t.extend(std::iter::repeat_n(self.b, self.order));
        t
    }

    fn with_order(&self, order: usize) -> Self {
        Self {
            order,
            ..self.clone()
        }
    }
}

/// Index of the first nonzero function at `x` and the `order` values of the
/// functions `first..first + order`, by the Cox-de Boor triangle.
fn bspline_nonzero(t: &[f64], order: usize, x: f64, out: &mut [f64]) -> usize {
    let q = t.len() - order;
    let span = (t.partition_point(|&k| k <= x).saturating_sub(1)).clamp(order - 1, q - 1);
    let degree = order - 1;
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    span - degree
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    BSpline(KnotVector),
    Fourier { a: f64, b: f64, size: usize },
}

impl BasisSpec {
    pub fn bspline_uniform(a: f64, b: f64, interior_knots: usize, order: usize) -> Result<Self> {
        KnotVector::uniform(a, b, interior_knots, order).map(Self::BSpline)
    }

    pub fn fourier(a: f64, b: f64, size: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Argument(format!("empty interval [{a}, {b}]")));
        }
        if size == 0 {
            return Err(Error::Argument("Fourier basis needs at least one term".into()));
        }
        Ok(Self::Fourier { a, b, size })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::BSpline(k) => k.dim(),
            Self::Fourier { size, .. } => *size,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::BSpline(k) => k.domain(),
            Self::Fourier { a, b, .. } => (*a, *b),
        }
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            Self::BSpline(k) => Some(k.order),
            Self::Fourier { .. } => None,
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (a, b) = self.domain();
        if x >= a && x <= b {
            Ok(())
        } else {
            Err(Error::Domain { x, a, b })
        }
    }

    /// Values of all basis functions at `x`.
    pub fn eval(&self, x: f64) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let mut v = DVector::zeros(self.dim());
        match self {
            Self::BSpline(k) => {
                let t = k.augmented();
                let mut vals = vec![0.0; k.order];
                let first = bspline_nonzero(&t, k.order, x, &mut vals);
                for (j, val) in vals.into_iter().enumerate() {
                    v[first + j] = val;
                }
            }
            Self::Fourier { a, b, size } => {
                let len = b - a;
                let omega = 2.0 * PI / len;
                let u = x - a;
                v[0] = 1.0 / len.sqrt();
                let c = (2.0 / len).sqrt();
                for idx in 1..*size {
                    let k = idx.div_ceil(2) as f64;
                    v[idx] = if idx % 2 == 1 {
                        c * (k * omega * u).sin()
                    } else {
                        c * (k * omega * u).cos()
                    };
                }
            }
        }
        Ok(v)
    }

    /// `m x q` matrix of basis values at the given abscissas.
    pub fn design(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let q = self.dim();
        let mut m = DMatrix::zeros(xs.len(), q);
        match self {
            Self::BSpline(k) => {
                let t = k.augmented();
                let mut vals = vec![0.0; k.order];
                for (i, &x) in xs.iter().enumerate() {
                    self.check_domain(x)?;
                    let first = bspline_nonzero(&t, k.order, x, &mut vals);
                    for (j, &val) in vals.iter().enumerate() {
                        m[(i, first + j)] = val;
                    }
                }
            }
            Self::Fourier { .. } => {
                for (i, &x) in xs.iter().enumerate() {
                    m.set_row(i, &self.eval(x)?.transpose());
                }
            }
        }
        Ok(m)
    }

    /// Coordinates of the constant function 1.
    pub fn constant_coefficients(&self) -> DVector<f64> {
        match self {
            Self::BSpline(k) => DVector::from_element(k.dim(), 1.0),
            Self::Fourier { a, b, size } => {
                let mut v = DVector::zeros(*size);
                v[0] = (b - a).sqrt();
                v
            }
        }
    }
}

/// Family and order of a basis whose size is still to be chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    BSpline { order: usize },
    Fourier,
}

impl BasisKind {
    /// Basis of dimension `size` on `[a, b]` (uniform knots for B-splines).
    pub fn with_size(self, (a, b): (f64, f64), size: usize) -> Result<BasisSpec> {
        match self {
            Self::BSpline { order } => {
                if size < order {
                    return Err(Error::Argument(format!(
                        "order-{order} splines need at least {order} functions, got {size}"
                    )));
                }
                BasisSpec::bspline_uniform(a, b, size - order, order)
            }
            Self::Fourier => BasisSpec::fourier(a, b, size),
        }
    }

    /// Default sizes swept by leave-one-out selection when every function has
    /// at least `min_samples` points: interior-knot counts 4, 6, .. up to
    /// `min(min_samples - order, 60)` for B-splines, odd sizes 3 .. 61 for
    /// Fourier.
    pub fn candidate_sizes(self, min_samples: usize) -> Vec<usize> {
        match self {
            Self::BSpline { order } => {
                let top = min_samples.saturating_sub(order).min(60);
                (4..=top).step_by(2).map(|l| l + order).collect()
            }
            Self::Fourier => {
                let top = min_samples.saturating_sub(1).min(61);
                (3..=top).step_by(2).collect()
            }
        }
    }
}

pub fn eval_basis(spec: &BasisSpec, x: f64) -> Result<DVector<f64>> {
    spec.eval(x)
}

/// Gram matrix `phi` and its upper Cholesky factor `chol`, `phi = chol^T chol`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub phi: DMatrix<f64>,
    pub chol: DMatrix<f64>,
}

impl GramFactor {
    pub fn from_gram(phi: DMatrix<f64>) -> Result<Self> {
        let phi = (&phi + phi.transpose()) * 0.5;
        let lower = Cholesky::new(phi.clone()).ok_or(Error::RankDeficient)?.unpack();
        Ok(Self {
            phi,
            chol: lower.transpose(),
        })
    }

    /// `U alpha`.
    pub fn scale(&self, alpha: &DVector<f64>) -> DVector<f64> {
        &self.chol * alpha
    }

    /// `U^{-1} beta`.
    pub fn unscale(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.chol
            .solve_upper_triangular(beta)
            .expect("Cholesky factor has a positive diagonal")
    }
}

/// Gram matrix of the basis. B-splines use `quad_points` Gauss-Legendre nodes
/// on every knot interval, which is exact once `quad_points >= order`; the
/// Fourier basis is orthonormal and gets the identity.
pub fn gram(spec: &BasisSpec, quad_points: usize) -> Result<GramFactor> {
    match spec {
        BasisSpec::Fourier { size, .. } => GramFactor::from_gram(DMatrix::identity(*size, *size)),
        BasisSpec::BSpline(k) => {
            if quad_points == 0 {
                return Err(Error::Argument("quadrature needs at least one node".into()));
            }
            let q = k.dim();
            let t = k.augmented();
            let (nodes, weights) = gauss_legendre(quad_points);
            let mut phi = DMatrix::zeros(q, q);
            let mut vals = vec![0.0; k.order];
            for w in k.breakpoints().windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (z, wt) in nodes.iter().zip(&weights) {
                    let x = mid + half * z;
                    let first = bspline_nonzero(&t, k.order, x, &mut vals);
                    for i in 0..k.order {
                        for j in 0..k.order {
                            phi[(first + i, first + j)] += half * wt * vals[i] * vals[j];
                        }
                    }
                }
            }
            GramFactor::from_gram(phi)
        }
    }
}

/// Basis carrying the `s`-th derivatives, and the `q' x q` matrix that maps
/// coordinates on `spec` to coordinates of the derivative.
///
/// For B-splines of order `order` the derivative lives on the order
/// `order - s` basis with the same interior knots; each step applies
/// `d_i = (order - 1) (c_{i+1} - c_i) / (t_{i+order} - t_{i+1})`.
/// Fourier derivatives stay in the same basis and need complete sine/cosine
/// pairs (odd size).
pub fn derivative_basis(spec: &BasisSpec, s: usize) -> Result<(BasisSpec, DMatrix<f64>)> {
    match spec {
        BasisSpec::BSpline(k) => {
            if s >= k.order {
                return Err(Error::UnsupportedOrder {
                    derivative: s,
                    reason: format!("order-{} splines have at most {} derivatives", k.order, k.order - 1),
                });
            }
            let mut map = DMatrix::identity(k.dim(), k.dim());
            let mut current = k.clone();
            for _ in 0..s {
                let step = bspline_derivative_step(&current);
                map = step * map;
                current = current.with_order(current.order - 1);
            }
            Ok((BasisSpec::BSpline(current), map))
        }
        BasisSpec::Fourier { a, b, size } => {
            if size % 2 == 0 {
                return Err(Error::UnsupportedOrder {
                    derivative: s,
                    reason: "Fourier derivative needs complete sine/cosine pairs (odd size)".into(),
                });
            }
            let omega = 2.0 * PI / (b - a);
            let mut d = DMatrix::zeros(*size, *size);
            for pair in 0..size / 2 {
                let k = (pair + 1) as f64;
                let (sin, cos) = (2 * pair + 1, 2 * pair + 2);
                d[(cos, sin)] = k * omega;
                d[(sin, cos)] = -k * omega;
            }
            let mut map = DMatrix::identity(*size, *size);
            for _ in 0..s {
                map = &d * map;
            }
            Ok((spec.clone(), map))
        }
    }
}

fn bspline_derivative_step(k: &KnotVector) -> DMatrix<f64> {
    let q = k.dim();
    let t = k.augmented();
    let p = (k.order - 1) as f64;
    let mut d = DMatrix::zeros(q - 1, q);
    for i in 0..q - 1 {
        let c = p / (t[i + k.order] - t[i + 1]);
        d[(i, i)] = -c;
        d[(i, i + 1)] = c;
    }
    d
}

/// A basis together with its Gram factor and a cache of derivative bases.
#[derive(Debug)]
pub struct Basis {
    spec: BasisSpec,
    gram: GramFactor,
    derived: RwLock<HashMap<usize, Arc<DerivedBasis>>>,
}

#[derive(Debug)]
pub struct DerivedBasis {
    pub basis: Arc<Basis>,
    pub map: DMatrix<f64>,
}

impl Basis {
    /// Builds the Gram factor with `order` nodes per knot interval.
    pub fn new(spec: BasisSpec) -> Result<Arc<Self>> {
        let nodes = spec.order().unwrap_or(1);
        Self::with_quadrature(spec, nodes)
    }

    pub fn with_quadrature(spec: BasisSpec, quad_points: usize) -> Result<Arc<Self>> {
        let gram = gram(&spec, quad_points)?;
        Ok(Arc::new(Self {
            spec,
            gram,
            derived: RwLock::new(HashMap::new()),
        }))
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn gram(&self) -> &GramFactor {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spec.domain()
    }

    pub fn volume(&self) -> f64 {
        let (a, b) = self.domain();
        b - a
    }

    pub fn eval(&self, x: f64) -> Result<DVector<f64>> {
        self.spec.eval(x)
    }

    pub fn design(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        self.spec.design(xs)
    }

    /// Cached `s`-th derivative basis.
    pub fn derivative(&self, s: usize) -> Result<Arc<DerivedBasis>> {
        if let Some(d) = self.derived.read().expect("derivative cache poisoned").get(&s) {
            return Ok(Arc::clone(d));
        }
        let (spec, map) = derivative_basis(&self.spec, s)?;
        let basis = Basis::new(spec)?;
        let entry = Arc::new(DerivedBasis { basis, map });
        let mut cache = self.derived.write().expect("derivative cache poisoned");
        Ok(Arc::clone(cache.entry(s).or_insert(entry)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let quad: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((quad - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn hat_functions_at_midpoint() {
        // order 2 on [0, 4] with knots 1, 2, 3
        let spec = BasisSpec::bspline_uniform(0.0, 4.0, 3, 2).unwrap();
        let v = spec.eval(1.5).unwrap();
        assert_eq!(v.len(), 5);
        assert_relative_eq!(v[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(v[2], 0.5, epsilon = 1e-15);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn endpoints_evaluate_to_clamped_values() {
        let spec = BasisSpec::bspline_uniform(-1.0, 2.0, 5, 4).unwrap();
        let left = spec.eval(-1.0).unwrap();
        let right = spec.eval(2.0).unwrap();
        assert_relative_eq!(left[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(right[spec.dim() - 1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let spec = BasisSpec::bspline_uniform(0.0, 1.0, 3, 4).unwrap();
        assert!(matches!(spec.eval(1.5), Err(Error::Domain { .. })));
        let f = BasisSpec::fourier(0.0, 1.0, 5).unwrap();
        assert!(matches!(f.eval(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn fourier_constant_term_and_gram() {
        let f = BasisSpec::fourier(2.0, 6.0, 7).unwrap();
        for x in [2.0, 3.3, 6.0] {
            assert_relative_eq!(f.eval(x).unwrap()[0], 0.5, epsilon = 1e-15);
        }
        let g = gram(&f, 1).unwrap();
        assert_eq!(g.phi, DMatrix::identity(7, 7));
        // quadrature agrees with the analytic identity
        let (nodes, weights) = gauss_legendre(64);
        let mut phi = DMatrix::zeros(7, 7);
        for (z, w) in nodes.iter().zip(&weights) {
            let v = f.eval(4.0 + 2.0 * z).unwrap();
            phi += &v * v.transpose() * (2.0 * w);
        }
        assert!((phi - DMatrix::<f64>::identity(7, 7)).amax() < 1e-12);
    }

    #[test]
    fn piecewise_constants_have_scaled_identity_gram() {
        let spec = BasisSpec::bspline_uniform(0.0, 3.0, 5, 1).unwrap();
        let h = 0.5;
        let g = gram(&spec, 1).unwrap();
        assert!((g.phi - DMatrix::<f64>::identity(6, 6) * h).amax() < 1e-15);
    }

    #[test]
    fn cubic_gram_is_quadrature_stable() {
        let spec = BasisSpec::bspline_uniform(850.0, 1050.0, 20, 4).unwrap();
        let g4 = gram(&spec, 4).unwrap();
        let g8 = gram(&spec, 8).unwrap();
        let g40 = gram(&spec, 40).unwrap();
        let scale = g4.phi.amax();
        assert!((&g4.phi - &g8.phi).amax() < 1e-12 * scale);
        assert!((&g4.phi - &g40.phi).amax() < 1e-10 * scale);
        let back = g4.chol.transpose() * &g4.chol;
        assert!((back - &g4.phi).amax() < 1e-12 * scale);
        assert!(g4.chol.lower_triangle().iter().enumerate().all(|(i, v)| {
            let (r, c) = (i % g4.chol.nrows(), i / g4.chol.nrows());
            r <= c || *v == 0.0
        }));
    }

    #[test]
    fn redundant_gram_fails_cholesky() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(GramFactor::from_gram(phi), Err(Error::RankDeficient)));
    }

    #[test]
    fn derivative_of_identity_on_hats_is_one() {
        // g(x) = x on order 2: coefficients are the knots themselves
        let spec = BasisSpec::bspline_uniform(0.0, 5.0, 4, 2).unwrap();
        let alpha = DVector::from_vec((0..6).map(|k| k as f64).collect());
        let (lower, map) = derivative_basis(&spec, 1).unwrap();
        assert_eq!(lower.order(), Some(1));
        let d = map * alpha;
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let spec = BasisSpec::bspline_uniform(0.0, 1.0, 7, 4).unwrap();
        let (_, map) = derivative_basis(&spec, 1).unwrap();
        let d = map * spec.constant_coefficients();
        assert!(d.amax() < 1e-12);
    }

    #[test]
    fn second_derivative_of_order_six_lives_on_order_four() {
        let spec = BasisSpec::bspline_uniform(850.0, 1050.0, 26, 6).unwrap();
        let (lower, map) = derivative_basis(&spec, 2).unwrap();
        match (&spec, &lower) {
            (BasisSpec::BSpline(k6), BasisSpec::BSpline(k4)) => {
                assert_eq!(k4.order(), 4);
                assert_eq!(k4.interior(), k6.interior());
            }
            _ => unreachable!(),
        }
        assert_eq!(map.shape(), (30, 32));
    }

    #[test]
    fn derivative_order_limit() {
        let spec = BasisSpec::bspline_uniform(0.0, 1.0, 3, 3).unwrap();
        assert!(matches!(derivative_basis(&spec, 3), Err(Error::UnsupportedOrder { .. })));
        let even = BasisSpec::fourier(0.0, 1.0, 4).unwrap();
        assert!(matches!(derivative_basis(&even, 1), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn fourier_derivative_matches_finite_differences() {
        let spec = BasisSpec::fourier(0.0, 2.0, 7).unwrap();
        let alpha = DVector::from_vec(vec![0.3, -1.0, 0.5, 0.25, 2.0, -0.7, 0.1]);
        let (_, map) = derivative_basis(&spec, 1).unwrap();
        let d = map * &alpha;
        let h = 1e-6;
        for x in [0.3, 0.9, 1.7] {
            let fd = (spec.eval(x + h).unwrap().dot(&alpha) - spec.eval(x - h).unwrap().dot(&alpha)) / (2.0 * h);
            assert_relative_eq!(spec.eval(x).unwrap().dot(&d), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn derivative_cache_returns_shared_entry() {
        let b = Basis::new(BasisSpec::bspline_uniform(0.0, 1.0, 5, 4).unwrap()).unwrap();
        let d1 = b.derivative(1).unwrap();
        let d2 = b.derivative(1).unwrap();
        assert!(Arc::ptr_eq(&d1, &d2));
        assert_eq!(d1.basis.dim(), b.dim() - 1);
    }

    fn spec_strategy() -> impl Strategy<Value = (BasisSpec, f64, f64)> {
        (1usize..7, 0usize..15, -5.0f64..5.0, 0.1f64..50.0)
            .prop_map(|(order, l, a, w)| (BasisSpec::bspline_uniform(a, a + w, l, order).unwrap(), a, a + w))
    }

    proptest! {
        #[test]
        fn partition_of_unity((spec, a, b) in spec_strategy(), u in 0.0f64..=1.0) {
            let x = a + u * (b - a);
            let v = spec.eval(x).unwrap();
            prop_assert!((v.sum() - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|&e| e >= -1e-15));
            prop_assert!(v.iter().filter(|e| **e != 0.0).count() <= spec.order().unwrap());
        }

        #[test]
        fn local_support_is_exact((spec, a, b) in spec_strategy(), u in 0.0f64..=1.0) {
            let x = a + u * (b - a);
            let v = spec.eval(x).unwrap();
            if let BasisSpec::BSpline(k) = &spec {
                let t = k.augmented();
                for (i, &e) in v.iter().enumerate() {
                    let (lo, hi) = (t[i], t[i + k.order()]);
                    let inside = x >= lo && (x < hi || (x == b && hi == b));
                    if !inside {
                        prop_assert_eq!(e, 0.0);
                    }
                }
            }
        }
    }
}
