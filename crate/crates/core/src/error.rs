use thiserror::Error;

/// Errors produced by the simulator and the analytic models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    InvalidUnitary(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid qubit indices: {0}")]
    InvalidQubits(String),

    #[error("circuit contains gates outside {{CX, SX, RZ}}: {0}")]
    NotTranspiled(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("depolarizing strength {0} leaves no signal to mitigate")]
    Unmitigable(f64),

    #[error("population inversion (p1 = {p1} >= p0 = {p0}) has no positive temperature")]
    NegativeTemperature { p0: f64, p1: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::InvalidDims(msg.into())
    }

    /// Whether this error stems from a numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Unmitigable(_) | Error::NegativeTemperature { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
