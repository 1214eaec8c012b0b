use thiserror::Error;

/// Errors raised by the simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The drive rate diverges at the requested time.
    #[error("drive rate diverges at t = {t}")]
    InfiniteRate { t: f64 },

    /// A numerical invariant was violated during integration.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// The request exceeds a documented size ceiling.
    #[error("capacity exceeded: {what} = {requested} (ceiling {ceiling})")]
    Capacity { what: &'static str, requested: usize, ceiling: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn integrity<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Integrity(msg.into()))
}
