use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tolerance:e}: estimated error {estimate:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("expected exactly two trap minima in the search window, found {0}")]
    MinimaCount(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("potential shape: {0}")]
    Shape(String),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("ambiguous state assignment: {0}")]
    Ambiguous(String),

    #[error("unreliable conditional phase: surviving amplitude {0:.3e} below 0.5")]
    UnreliablePhase(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }
}
