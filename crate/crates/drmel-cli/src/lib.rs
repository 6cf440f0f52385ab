//! Library surface of the command-line front end, exposed for integration
//! tests: data ingestion, report rendering, and config-file handling.

pub mod config;
pub mod ingest;
pub mod report;

use std::fmt;

/// Process exit classification: 2 usage, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(drmel::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Numeric(err) => write!(f, "numerical failure: {err}"),
            CliError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<drmel::Error> for CliError {
    fn from(err: drmel::Error) -> Self {
        match err {
            drmel::Error::InvalidData(msg) => CliError::Data(msg),
            drmel::Error::Level { value } => {
                CliError::Usage(format!("level {value} outside (0, 1)"))
            }
            drmel::Error::Param(msg) => CliError::Usage(msg),
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}

pub type CliResult<T> = Result<T, CliError>;
