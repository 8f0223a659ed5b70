use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("branch failure: {0}")]
    Branch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("not an eigenvalue: {0}")]
    NotEigenvalue(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Overflow(_) | Error::Branch(_) | Error::Numerical(_) | Error::NotEigenvalue(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
