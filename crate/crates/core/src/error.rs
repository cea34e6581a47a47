use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("root finder did not converge: {0}")]
    NonConvergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Config-level problems (bad parameters) as opposed to failures that
    /// only show up while computing.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Invalid(_) | Error::Unsupported(_))
    }

    /// Same variant with `ctx` prefixed to the message.
    pub fn context(self, ctx: impl std::fmt::Display) -> Error {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Invalid(m) => Error::Invalid(format!("{ctx}: {m}")),
            Error::NonConvergence(m) => Error::NonConvergence(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{ctx}: {m}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
