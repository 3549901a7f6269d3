use thiserror::Error;

/// Errors raised by the numerical routines of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("division by zero guard triggered in {0}")]
    DivisionByZero(&'static str),

    #[error("time step failed at t = {t}: {reason} (dt = {dt:e})")]
    StepFailure { t: f64, dt: f64, reason: String },

    #[error("{0} did not converge: {1}")]
    NotConverged(&'static str, String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
