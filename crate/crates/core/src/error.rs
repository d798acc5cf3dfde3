use thiserror::Error;

/// Errors produced anywhere in the modelling, control and experiment pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failure at t = {t}: non-finite state")]
    Integration { t: f64 },

    #[error("wind speed {v} m/s outside the partial-load range [{min}, {max})")]
    OutOfRange { v: f64, min: f64, max: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible QP: constraint row {row} cannot be satisfied")]
    Infeasible { row: usize },

    #[error("QP solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("matrix exponential overflow")]
    Overflow,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation failed at step {step}: {cause}")]
    Simulation { step: usize, cause: Box<Error> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
