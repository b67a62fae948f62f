use thiserror::Error;

/// Errors raised by the simulation, filtering and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range (must be < {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("state blew up at step {step}")]
    BlowUp { step: usize },

    #[error("particle filter collapsed at step {step} (ess = {ess})")]
    FilterCollapse { step: usize, ess: f64 },

    #[error("degenerate normaliser: {0}")]
    Degenerate(String),

    #[error("covariance lost positive semidefiniteness (min eigenvalue {min_eigenvalue}) at step {step}")]
    NotPsd { step: usize, min_eigenvalue: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite { what: what.into() }
    }
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
