use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a physical invariant.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Integration or decomposition failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A preparation or readout step fell short of its fidelity target.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("estimation error: {0}")]
    Estimation(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::DimensionMismatch { .. })
    }
}
