//! Error type shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed textual input (CSV cell or row).
    #[error("parse error: {context}")]
    Parse { context: String },

    /// Shapes or sizes incompatible with the requested operation.
    #[error("dimension error: {context}")]
    Dimension { context: String },

    /// Underlying file I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Invalid configuration (parameter ranges, mismatched components).
    #[error("config error: {context}")]
    Config { context: String },

    /// The debiasing system could not be solved.
    #[error("singular system: {context}")]
    SingularSystem { context: String },

    /// A gapped index set required by an estimator is empty (n too small
    /// for this M).
    #[error("empty index set: {context}")]
    EmptyIndexSet { context: String },

    /// The variance estimate is non-positive; the statistic is undefined.
    #[error("degenerate variance estimate: {context}")]
    DegenerateVariance { context: String },

    /// Cholesky factorization hit a non-positive pivot; `minor` is the
    /// 1-based index of the offending leading minor.
    #[error("matrix not positive definite at leading minor {minor}")]
    NotPositiveDefinite { minor: usize },

    /// Scalar argument outside the mathematical domain of the function.
    #[error("domain error: {context}")]
    Domain { context: String },
}

impl Error {
    pub fn parse(context: impl Into<String>) -> Self {
        Error::Parse { context: context.into() }
    }
    pub fn dim(context: impl Into<String>) -> Self {
        Error::Dimension { context: context.into() }
    }
    pub fn config(context: impl Into<String>) -> Self {
        Error::Config { context: context.into() }
    }
    pub fn domain(context: impl Into<String>) -> Self {
        Error::Domain { context: context.into() }
    }
    pub(crate) fn degenerate(context: impl Into<String>) -> Self {
        Error::DegenerateVariance { context: context.into() }
    }
    pub(crate) fn empty_set(context: impl Into<String>) -> Self {
        Error::EmptyIndexSet { context: context.into() }
    }
}
