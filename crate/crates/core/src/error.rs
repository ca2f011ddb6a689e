use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite (non-positive pivot at {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error(
        "skeletonization of box {box_id} at level {level} produced an indefinite redundant block \
         (pivot {pivot}); tighten eps"
    )]
    IndefiniteBox {
        box_id: usize,
        level: usize,
        pivot: usize,
    },

    #[error("subdomain {subdomain}: {source}")]
    Subdomain {
        subdomain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }

    /// True for failures of numerical origin (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => false,
            Error::Subdomain { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}
