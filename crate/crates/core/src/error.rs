use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("invalid regularization sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid quantile table: {0}")]
    InvalidTable(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("state evolution infeasible: {0}")]
    Infeasible(String),

    #[error("quadrature order {0} unsupported (must be 1..=256)")]
    QuadratureOrder(usize),

    #[error("no feasible baseline parameter on the tuning grid")]
    NoFeasibleBaseline,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
