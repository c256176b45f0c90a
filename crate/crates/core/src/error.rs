use thiserror::Error;

/// Errors raised by the root-finding library and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition on the inputs does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The numeric argmax ran out of its evaluation budget.
    #[error("argmax did not converge within {evals} evaluations (best candidate {best})")]
    Convergence { best: f64, evals: usize },

    /// Malformed configuration or input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
