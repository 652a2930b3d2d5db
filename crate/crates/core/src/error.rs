use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("polynomial of degree {degree} leaves residual {residual:e} (limit {limit:e})")]
    DegreeInsufficient {
        degree: usize,
        residual: f64,
        limit: f64,
    },

    #[error("point is not strictly feasible (constraint {index} has value {value:e})")]
    InfeasiblePoint { index: usize, value: f64 },

    #[error("problem has an empty interior: {0}")]
    InfeasibleSpec(String),

    #[error("utility domain error: {0}")]
    Domain(String),

    #[error("line search stalled at step {step:e}")]
    LineSearchStalled { step: f64 },

    #[error("{scheme}: {source}")]
    Scheme {
        scheme: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::InfeasibleSpec(_) => true,
            Error::Scheme { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
