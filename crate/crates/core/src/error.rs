use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("network is not connected")]
    Connectivity,
    #[error("cell index {index} out of range 1..={n}")]
    Index { index: usize, n: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("inconsistent jet: {0}")]
    Jet(String),
    #[error("genericity violated: {0}")]
    Genericity(String),
    #[error("rank condition failed: {0}")]
    Rank(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("exact path unavailable: {0}")]
    Inexact(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Connectivity | Error::Index { .. } | Error::Jet(_) => 2,
            Error::Precondition(_) | Error::Genericity(_) | Error::Inexact(_) => 3,
            _ => 1,
        }
    }
}
