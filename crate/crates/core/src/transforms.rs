//! Functional centering and reduction, exact derivatives and the
//! (semi-)metrics built on them. Everything runs on coordinates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::represent::Representation;

/// Mean and scale of functions on a domain of volume `|V| = b - a`:
/// `mean(g) = <g, 1> / |V|` and `scale(g) = ||g - mean(g)|| / |V|`.
#[derive(Debug, Clone)]
pub struct FunctionalScaler {
    volume: f64,
    const_alpha: DVector<f64>,
    const_beta: DVector<f64>,
}

impl FunctionalScaler {
    pub fn new(basis: &Arc<Basis>) -> Self {
        let const_alpha = basis.spec().constant_coefficients();
        let const_beta = basis.gram().scale(&const_alpha);
        Self {
            volume: basis.volume(),
            const_alpha,
            const_beta,
        }
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn mean(&self, r: &Representation) -> f64 {
        r.beta().dot(&self.const_beta) / self.volume
    }

    pub fn center(&self, r: &Representation) -> Result<Representation> {
        let mu = self.mean(r);
        Representation::from_alpha(Arc::clone(r.basis()), r.alpha() - &self.const_alpha * mu)
    }

    pub fn scale(&self, r: &Representation) -> Result<f64> {
        Ok(self.center(r)?.norm() / self.volume)
    }

    /// `g_s = g_c / (||g_c|| / |V|)`.
    pub fn center_reduce(&self, r: &Representation) -> Result<Representation> {
        let centered = self.center(r)?;
        let norm = centered.norm();
        if norm <= 1e-12 * r.norm() || norm == 0.0 {
            return Err(Error::ConstantFunction);
        }
        let factor = self.volume / norm;
        Representation::from_alpha(Arc::clone(r.basis()), centered.alpha() * factor)
    }
}

pub fn center_reduce(r: &Representation) -> Result<Representation> {
    FunctionalScaler::new(r.basis()).center_reduce(r)
}

/// `s`-th derivative, on the derivative basis of `r`'s basis.
pub fn derive(r: &Representation, s: usize) -> Result<Representation> {
    if s == 0 {
        return Ok(r.clone());
    }
    let derived = r.basis().derivative(s)?;
    Representation::from_alpha(Arc::clone(&derived.basis), &derived.map * r.alpha())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemiMetric {
    L2,
    /// L² distance between `s`-th derivatives.
    Derivative(usize),
}

impl SemiMetric {
    /// Coordinates whose Euclidean distance is this (semi-)metric.
    pub fn embed(&self, r: &Representation) -> Result<DVector<f64>> {
        match self {
            Self::L2 => Ok(r.to_beta()),
            Self::Derivative(s) => Ok(derive(r, *s)?.to_beta()),
        }
    }

    pub fn distance(&self, r1: &Representation, r2: &Representation) -> Result<f64> {
        if !r1.same_basis(r2) {
            return Err(Error::Contract("representations live on different bases".into()));
        }
        Ok((self.embed(r1)? - self.embed(r2)?).norm())
    }

    pub fn derivative_order(&self) -> usize {
        match self {
            Self::L2 => 0,
            Self::Derivative(s) => *s,
        }
    }
}

pub fn distance(r1: &Representation, r2: &Representation, metric: SemiMetric) -> Result<f64> {
    metric.distance(r1, r2)
}

impl FromStr for SemiMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Self::L2),
            "deriv1" => Ok(Self::Derivative(1)),
            "deriv2" => Ok(Self::Derivative(2)),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for SemiMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::L2 => f.write_str("l2"),
            Self::Derivative(s) => write!(f, "deriv{s}"),
        }
    }
}
