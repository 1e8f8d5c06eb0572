use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the allocation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("misaligned dates: {0}")]
    MisalignedDates(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate risk: {0}")]
    DegenerateRisk(String),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::MisalignedDates(_)
            | Error::InsufficientData(_)
            | Error::Io { .. }
            | Error::Parse { .. } => ErrorClass::Data,
            Error::NonFiniteInput(_)
            | Error::DegenerateInput(_)
            | Error::DegenerateRisk(_)
            | Error::SingularDesign(_) => ErrorClass::Numeric,
        }
    }
}
