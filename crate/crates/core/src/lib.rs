//! Regression on sampled curves through smooth basis representations.
//!
//! Each observation is a list of `(x, y)` samples. It is projected on a
//! B-spline or Fourier basis, and the coordinates are rescaled by the Cholesky
//! factor of the basis Gram matrix so that Euclidean operations on them match
//! the L² operations on the reconstructed functions. Transforms (functional
//! centering and reduction, exact spline derivatives, functional PCA) act on
//! those coordinates, and the results feed a Gaussian RBF network or a
//! one-hidden-layer perceptron.

// `!(a < b)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod fdata;
pub mod fpca;
pub mod imputation;
pub mod mlp;
pub mod rbfn;
pub mod represent;
pub mod seed;
pub mod selection;
pub mod transforms;

pub use nalgebra::DVector;
pub use basis::{Basis, BasisKind, BasisSpec, DerivedBasis, GramFactor, KnotVector};
pub use error::{Error, Result};
pub use fdata::{Dataset, DatasetFormat, SampledFunction, SamplePoint, SplitMode};
pub use fpca::FpcaModel;
pub use imputation::MaskedVector;
pub use mlp::MlpModel;
pub use rbfn::RbfnModel;
pub use represent::{HatDiag, Representation};
pub use selection::{ExperimentReport, ExperimentSpec, FoldPlan};
pub use transforms::{FunctionalScaler, SemiMetric};
