use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {0} is not a grid time")]
    GridAlignment(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("exponent error: {0}")]
    Exponent(String),
    #[error("controlled path is not defined relative to the supplied rough path")]
    Reference,
    #[error("capability error: {0}")]
    Capability(String),
    #[error("horizon error: cannot extend beyond t = {0}")]
    Horizon(f64),
    #[error("guard: {0}")]
    Guard(String),
    #[error("fixed-point iteration did not converge: {0}")]
    NonConvergence(Box<crate::rde::NonConvergence>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for guard, exponent and convergence failures,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) | Error::Exponent(_) | Error::NonConvergence(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
