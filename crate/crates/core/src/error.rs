use thiserror::Error;

/// Errors surfaced by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical breakdown: {message} (condition estimate {condition:.3e})")]
    Breakdown { message: String, condition: f64 },
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Breakdown { .. } | Error::Quadrature(_) | Error::NotConverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
