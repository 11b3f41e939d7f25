use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{0}")]
    Degenerate(String),

    #[error(
        "truncation at {truncation} photons leaves tail mass {tail:e}; increase the truncation"
    )]
    Truncation { truncation: usize, tail: f64 },

    #[error("no bracketing minimum found: {0}")]
    NoBracket(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
