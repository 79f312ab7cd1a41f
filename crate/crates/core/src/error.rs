use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integer does not fit the representable range of a digit system.
    #[error("value {value} out of range [0, {max}]")]
    Range { value: u128, max: u128 },

    /// An operation was invoked in a state that does not allow it.
    #[error("state error: {0}")]
    State(String),

    /// An internal construction produced something it should never produce.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Rejection sampling gave up.
    #[error("rejection sampling exceeded {0} attempts")]
    Resample(usize),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
