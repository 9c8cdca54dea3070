use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by data preparation, sampling and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at unit {unit}, time {time}")]
    NonFinite { unit: usize, time: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("rho = {rho} lies outside the invertibility interval ({lo}, {hi})")]
    RhoOutOfSupport { rho: f64, lo: f64, hi: f64 },

    #[error("unstable parameters: spectral radius of A(rho, phi) is {0}")]
    Unstable(f64),

    #[error("precision matrix for {block} is not positive definite")]
    NotPositiveDefinite { block: &'static str },

    #[error("stability truncation for {block} exhausted {retries} retries")]
    StabilityBudget { block: &'static str, retries: usize },

    #[error("non-finite value in draw at iteration {iteration} ({block})")]
    NonFiniteDraw { iteration: usize, block: &'static str },

    #[error("too few draws: have {have}, need at least {need}")]
    TooFewDraws { have: usize, need: usize },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("draws do not carry {0}")]
    MissingTrace(&'static str),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NegativeWeight { .. } => "negative_weight",
            Error::RhoOutOfSupport { .. } => "rho_out_of_support",
            Error::Unstable(_) => "unstable",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::StabilityBudget { .. } => "stability_budget",
            Error::NonFiniteDraw { .. } => "non_finite_draw",
            Error::TooFewDraws { .. } => "too_few_draws",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::MissingTrace(_) => "missing_trace",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
