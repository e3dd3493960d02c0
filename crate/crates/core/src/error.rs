use thiserror::Error;

/// Errors raised by the simulator and the ledger.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The truncated Fock space cannot represent the requested state.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Operand dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid scenario or space configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A thermodynamic or dynamical invariant failed during a run.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
