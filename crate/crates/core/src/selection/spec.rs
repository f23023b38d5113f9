//! Key-value experiment descriptions.
//!
//! ```text
//! # comment
//! name = deriv2-rbfn
//! basis = bspline        # raw | bspline | fourier
//! order = 6
//! metric = deriv2        # l2 | deriv1 | deriv2
//! model = rbfn           # rbfn | mlp
//! ```
//!
//! Every key has a default; unknown keys and malformed values are rejected.

use std::fmt;
use std::str::FromStr;

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::mlp::MAX_HIDDEN;
use crate::transforms::SemiMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// Sampled values on the common grid.
    Raw,
    Basis(BasisKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeChoice {
    Loo,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preproc {
    None,
    CenterReduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaKind {
    None,
    /// Standardized PCA of raw grid vectors.
    Classical,
    /// PCA of scaled basis coordinates.
    Functional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    Fixed(usize),
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rbfn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Impute {
    None,
    Mean,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    Cv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub input: InputKind,
    pub basis_size: SizeChoice,
    pub preproc: Preproc,
    pub metric: SemiMetric,
    pub pca: PcaKind,
    pub components: Components,
    pub max_components: usize,
    pub whiten: bool,
    pub model: ModelKind,
    pub max_centers: usize,
    pub cv_folds: usize,
    pub width_grid: Vec<f64>,
    pub ridge_grid: Vec<f64>,
    pub hidden: Vec<usize>,
    pub restarts: usize,
    pub cv_restarts: usize,
    pub decay_grid: Vec<f64>,
    pub max_iter: usize,
    pub impute: Impute,
    pub impute_k: KChoice,
    pub impute_k_grid: Vec<usize>,
    pub expert_scale: bool,
    pub seed: u64,
    pub drop_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            input: InputKind::Raw,
            basis_size: SizeChoice::Loo,
            preproc: Preproc::None,
            metric: SemiMetric::L2,
            pca: PcaKind::None,
            components: Components::Cv,
            max_components: 20,
            whiten: false,
            model: ModelKind::Rbfn,
            max_centers: 100,
            cv_folds: 4,
            width_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            ridge_grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            hidden: (1..=MAX_HIDDEN).collect(),
            restarts: 60,
            cv_restarts: 3,
            decay_grid: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            max_iter: 500,
            impute: Impute::None,
            impute_k: KChoice::Cv,
            impute_k_grid: vec![1, 2, 4, 8, 16],
            expert_scale: false,
            seed: 0,
            drop_fraction: 0.0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected on or off, got `{value}`"))),
    }
}

/// `a..b` (inclusive) or a comma-separated list.
fn parse_usize_grid(key: &str, value: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = if let Some((a, b)) = value.split_once("..") {
        let (a, b): (usize, usize) = (parse_num(key, a.trim())?, parse_num(key, b.trim())?);
        (a..=b).collect()
    } else {
        value.split(',').map(|t| parse_num(key, t.trim())).collect::<Result<_>>()?
    };
    if v.is_empty() {
        return Err(Error::Config(format!("`{key}`: empty grid")));
    }
    Ok(v)
}

fn parse_f64_grid(key: &str, value: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = value.split(',').map(|t| parse_num(key, t.trim())).collect::<Result<_>>()?;
    if v.is_empty() || v.iter().any(|x: &f64| !x.is_finite() || *x < 0.0) {
        return Err(Error::Config(format!("`{key}`: expected non-negative numbers")));
    }
    Ok(v)
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut order: Option<usize> = None;
        let mut basis: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "basis" => basis = Some(value.to_string()),
                "order" => order = Some(parse_num(key, value)?),
                _ => spec.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?,
            }
        }
        spec.input = match (basis.as_deref().unwrap_or("raw"), order) {
            ("raw", None) => InputKind::Raw,
            ("bspline", order) => InputKind::Basis(BasisKind::BSpline { order: order.unwrap_or(4) }),
            ("fourier", None) => InputKind::Basis(BasisKind::Fourier),
            (b @ ("raw" | "fourier"), Some(_)) => {
                return Err(Error::Config(format!("`order` does not apply to basis `{b}`")))
            }
            (other, _) => return Err(Error::Config(format!("unknown basis `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one key (everything except `basis` and `order`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => {
                if value.is_empty() || value.contains(|c: char| c.is_whitespace() || c == ',' || c == '/') {
                    return Err(Error::Config(format!("invalid name `{value}`")));
                }
                self.name = value.to_string();
            }
            "basis-size" => {
                self.basis_size = match value {
                    "loo" => SizeChoice::Loo,
                    v => SizeChoice::Fixed(parse_num(key, v)?),
                }
            }
            "preproc" => {
                self.preproc = match value {
                    "none" => Preproc::None,
                    "center-reduce" => Preproc::CenterReduce,
                    v => return Err(Error::Config(format!("unknown preproc `{v}`"))),
                }
            }
            "metric" => self.metric = value.parse()?,
            "pca" => {
                self.pca = match value {
                    "none" => PcaKind::None,
                    "classical" => PcaKind::Classical,
                    "functional" => PcaKind::Functional,
                    v => return Err(Error::Config(format!("unknown pca `{v}`"))),
                }
            }
            "pca-components" => {
                self.components = match value {
                    "cv" => Components::Cv,
                    v => Components::Fixed(parse_num(key, v)?),
                }
            }
            "pca-max-components" => self.max_components = parse_num(key, value)?,
            "whiten" => self.whiten = parse_switch(key, value)?,
            "model" => {
                self.model = match value {
                    "rbfn" => ModelKind::Rbfn,
                    "mlp" => ModelKind::Mlp,
                    v => return Err(Error::Config(format!("unknown model `{v}`"))),
                }
            }
            "max-centers" => self.max_centers = parse_num(key, value)?,
            "cv-folds" => self.cv_folds = parse_num(key, value)?,
            "width-grid" => self.width_grid = parse_f64_grid(key, value)?,
            "ridge-grid" => self.ridge_grid = parse_f64_grid(key, value)?,
            "hidden" => self.hidden = parse_usize_grid(key, value)?,
            "restarts" => self.restarts = parse_num(key, value)?,
            "cv-restarts" => self.cv_restarts = parse_num(key, value)?,
            "decay-grid" => self.decay_grid = parse_f64_grid(key, value)?,
            "max-iter" => self.max_iter = parse_num(key, value)?,
            "impute" => {
                self.impute = match value {
                    "none" => Impute::None,
                    "mean" => Impute::Mean,
                    "knn" => Impute::Knn,
                    v => return Err(Error::Config(format!("unknown imputation `{v}`"))),
                }
            }
            "impute-k" => {
                self.impute_k = match value {
                    "cv" => KChoice::Cv,
                    v => KChoice::Fixed(parse_num(key, v)?),
                }
            }
            "impute-k-grid" => self.impute_k_grid = parse_usize_grid(key, value)?,
            "expert-scale" => self.expert_scale = parse_switch(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "drop-fraction" => self.drop_fraction = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Stage compatibility, checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        let is_basis = matches!(self.input, InputKind::Basis(_));
        if let InputKind::Basis(BasisKind::BSpline { order }) = self.input {
            if order < 1 {
                return fail("B-spline order must be at least 1".into());
            }
            let s = self.metric.derivative_order();
            if s >= order {
                return fail(format!("derivative of order {s} needs a B-spline order above {s}, got {order}"));
            }
        }
        if !is_basis && self.metric != SemiMetric::L2 {
            return fail(format!("metric {} requires a basis representation", self.metric));
        }
        if !is_basis && self.preproc != Preproc::None {
            return fail("functional centering and reduction requires a basis representation".into());
        }
        if is_basis && (self.impute != Impute::None || self.expert_scale) {
            return fail("imputation and expert scaling apply to raw inputs only".into());
        }
        if !is_basis && self.basis_size != SizeChoice::Loo {
            return fail("basis-size set for raw inputs".into());
        }
        match (self.pca, is_basis) {
            (PcaKind::Functional, false) => return fail("functional PCA requires a basis representation".into()),
            (PcaKind::Classical, true) => return fail("classical PCA applies to raw inputs; use functional PCA".into()),
            _ => {}
        }
        if self.pca == PcaKind::None && (self.whiten || self.components != Components::Cv) {
            return fail("whitening and component counts require a PCA stage".into());
        }
        if let Components::Fixed(k) = self.components {
            if k == 0 {
                return fail("pca-components must be positive".into());
            }
        }
        if self.max_components == 0 {
            return fail("pca-max-components must be positive".into());
        }
        if self.model == ModelKind::Mlp && (self.pca == PcaKind::None || !self.whiten) {
            return fail("the perceptron takes whitened PCA scores: set a pca stage and whiten = on".into());
        }
        if self.cv_folds < 2 {
            return fail("cv-folds must be at least 2".into());
        }
        if self.max_centers == 0 {
            return fail("max-centers must be positive".into());
        }
        if self.width_grid.iter().any(|w| *w <= 0.0) {
            return fail("width multipliers must be positive".into());
        }
        if self.hidden.iter().any(|h| !(1..=MAX_HIDDEN).contains(h)) {
            return fail(format!("hidden units must lie in 1..={MAX_HIDDEN}"));
        }
        if self.restarts == 0 || self.cv_restarts == 0 || self.max_iter == 0 {
            return fail("restarts, cv-restarts and max-iter must be positive".into());
        }
        if self.impute == Impute::Knn && self.impute_k_grid.contains(&0) {
            return fail("impute-k-grid entries must be positive".into());
        }
        if self.impute_k == KChoice::Fixed(0) {
            return fail("impute-k must be positive".into());
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return fail(format!("drop-fraction {} outside [0, 1)", self.drop_fraction));
        }
        Ok(())
    }

    /// Candidate neighbour counts for k-NN imputation.
    pub fn impute_ks(&self) -> Vec<Option<usize>> {
        match (self.impute, self.impute_k) {
            (Impute::Knn, KChoice::Cv) => self.impute_k_grid.iter().map(|&k| Some(k)).collect(),
            (Impute::Knn, KChoice::Fixed(k)) => vec![Some(k)],
            _ => vec![None],
        }
    }
}

impl FromStr for ExperimentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Canonical text form; parsing it gives back the same spec.
impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        match self.input {
            InputKind::Raw => writeln!(f, "basis = raw")?,
            InputKind::Basis(BasisKind::BSpline { order }) => writeln!(f, "basis = bspline\norder = {order}")?,
            InputKind::Basis(BasisKind::Fourier) => writeln!(f, "basis = fourier")?,
        }
        match self.basis_size {
            SizeChoice::Loo => writeln!(f, "basis-size = loo")?,
            SizeChoice::Fixed(q) => writeln!(f, "basis-size = {q}")?,
        }
        let preproc = match self.preproc {
            Preproc::None => "none",
            Preproc::CenterReduce => "center-reduce",
        };
        writeln!(f, "preproc = {preproc}")?;
        writeln!(f, "metric = {}", self.metric)?;
        let pca = match self.pca {
            PcaKind::None => "none",
            PcaKind::Classical => "classical",
            PcaKind::Functional => "functional",
        };
        writeln!(f, "pca = {pca}")?;
        match self.components {
            Components::Cv => writeln!(f, "pca-components = cv")?,
            Components::Fixed(k) => writeln!(f, "pca-components = {k}")?,
        }
        writeln!(f, "pca-max-components = {}", self.max_components)?;
        writeln!(f, "whiten = {}", if self.whiten { "on" } else { "off" })?;
        let model = match self.model {
            ModelKind::Rbfn => "rbfn",
            ModelKind::Mlp => "mlp",
        };
        writeln!(f, "model = {model}")?;
        writeln!(f, "max-centers = {}", self.max_centers)?;
        writeln!(f, "cv-folds = {}", self.cv_folds)?;
        writeln!(f, "width-grid = {}", join(&self.width_grid))?;
        writeln!(f, "ridge-grid = {}", join(&self.ridge_grid))?;
        writeln!(f, "hidden = {}", join(&self.hidden))?;
        writeln!(f, "restarts = {}", self.restarts)?;
        writeln!(f, "cv-restarts = {}", self.cv_restarts)?;
        writeln!(f, "decay-grid = {}", join(&self.decay_grid))?;
        writeln!(f, "max-iter = {}", self.max_iter)?;
        let impute = match self.impute {
            Impute::None => "none",
            Impute::Mean => "mean",
            Impute::Knn => "knn",
        };
        writeln!(f, "impute = {impute}")?;
        match self.impute_k {
            KChoice::Cv => writeln!(f, "impute-k = cv")?,
            KChoice::Fixed(k) => writeln!(f, "impute-k = {k}")?,
        }
        writeln!(f, "impute-k-grid = {}", join(&self.impute_k_grid))?;
        writeln!(f, "expert-scale = {}", if self.expert_scale { "on" } else { "off" })?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "drop-fraction = {}", self.drop_fraction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_uses_defaults() {
        let s = ExperimentSpec::parse("name = x\nbasis = bspline\norder = 6\nmetric = deriv2\n").unwrap();
        assert_eq!(s.input, InputKind::Basis(BasisKind::BSpline { order: 6 }));
        assert_eq!(s.metric, SemiMetric::Derivative(2));
        assert_eq!(s.max_centers, 100);
        assert_eq!(s.cv_folds, 4);
    }

    #[test]
    fn display_round_trips() {
        let text = "name = m\nbasis = raw\npca = classical\nwhiten = on\nmodel = mlp\nhidden = 1..3\nimpute = knn\nexpert-scale = on\ndrop-fraction = 0.1\n";
        let s = ExperimentSpec::parse(text).unwrap();
        assert_eq!(s.hidden, vec![1, 2, 3]);
        assert_eq!(ExperimentSpec::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn incompatible_stages_are_rejected() {
        for text in [
            "basis = bspline\norder = 2\nmetric = deriv2",
            "basis = raw\nmetric = deriv1",
            "basis = raw\npca = functional",
            "basis = bspline\npca = classical",
            "basis = bspline\nimpute = mean",
            "basis = raw\npca = classical\nmodel = mlp",
            "basis = raw\nwhiten = on",
            "nonsense = 1",
            "basis = spline",
            "basis = raw\nhidden = 0..2",
        ] {
            assert!(matches!(ExperimentSpec::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
