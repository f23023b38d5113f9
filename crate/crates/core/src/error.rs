use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("abscissa {x} outside domain [{a}, {b}]")]
    Domain { x: f64, a: f64, b: f64 },

    #[error("Gram matrix is not positive definite (redundant basis)")]
    RankDeficient,

    #[error("derivative of order {derivative} unsupported for this basis: {reason}")]
    UnsupportedOrder { derivative: usize, reason: String },

    #[error("coefficients not identifiable from the samples (basis indices {indices:?})")]
    Unidentifiable { indices: Vec<usize> },

    #[error("design matrix ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("leave-one-out undefined: smoother diagonal reaches 1 at sample {index}")]
    DegenerateLoo { index: usize },

    #[error("basis size selection failed: {0}")]
    Selection(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("function is constant; reduction undefined")]
    ConstantFunction,

    #[error("not enough samples: {0}")]
    Rank(String),

    #[error("principal component {component} has negligible variance {eigenvalue:.3e}")]
    DegenerateComponent { component: usize, eigenvalue: f64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("imputation failed: {0}")]
    Imputation(String),

    #[error("sample {sample} shares no observed coordinate with any candidate neighbour")]
    Incomparable { sample: usize },

    #[error("observed values are constant; scaling undefined")]
    Scaling,

    #[error("config error: {0}")]
    Config(String),

    #[error("{experiment}: {stage}: {source}")]
    Stage {
        experiment: String,
        stage: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
