use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degenerate covariance: smallest eigenvalue {0:e} below tolerance")]
    DegenerateCovariance(f64),
    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("eigen-solver failed to converge")]
    NoConvergence,
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("order cap exceeded: {0}")]
    CapExceeded(String),
    #[error("near-singular resolvent at momentum index {index} (|1 - alpha*s| = {modulus:e})")]
    Singular { index: usize, modulus: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regime precondition violated: {0}")]
    Regime(String),
    #[error("too few samples: {0}")]
    Samples(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
