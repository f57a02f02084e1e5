use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("{solver} did not converge: {detail}")]
    NoConvergence { solver: &'static str, detail: String },

    #[error("global Maxwellian window violated: {0}")]
    WindowViolation(String),

    #[error("stability condition violated: {0}")]
    Stability(String),

    #[error("operator certification failed: {0}")]
    Certification(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("{0}")]
    Precondition(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}
