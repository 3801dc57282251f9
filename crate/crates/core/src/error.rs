use thiserror::Error;

/// Errors raised by the bound computations and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the caller's input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Orlicz generator is not of exponential type, so the requested
    /// integral diverges for every positive rate.
    #[error("unsupported generator: {0}")]
    UnsupportedGenerator(String),

    /// A numerical routine failed to converge (bracketing exhausted,
    /// quadrature did not meet its tolerance, eigen-solver stalled).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
