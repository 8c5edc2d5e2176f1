use thiserror::Error;

/// Errors raised by the networks, simulators and pricing pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("malformed network file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
