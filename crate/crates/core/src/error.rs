//! Error type shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by construction, analysis and recovery routines.
#[derive(Debug)]
pub enum Error {
    /// Input data violates a value invariant (non-finite sample, empty vector).
    InvalidInput(String),
    /// Argument violates a precondition (dimension mismatch, bad parameter).
    InvalidArgument(String),
    /// A fit could not be computed (log of zero magnitudes, too few points).
    DegenerateFit(String),
    /// The measurement operator is rank deficient; the affine projection
    /// underlying basis pursuit cannot be factorized.
    InfeasibleFactorization(String),
    /// The requested exhaustive computation exceeds the combinatorial budget.
    InstanceTooLarge(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// Malformed or unsupported file contents (WAV, matrix dump).
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DegenerateFit(msg) => write!(f, "degenerate fit: {msg}"),
            Error::InfeasibleFactorization(msg) => {
                write!(f, "infeasible factorization: {msg}")
            }
            Error::InstanceTooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
