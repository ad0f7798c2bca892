//! Command-line front end: argument definitions, configuration files, run
//! manifests and the command implementations.

pub mod args;
pub mod commands;
pub mod config;
pub mod format;
pub mod manifest;

use std::fmt;
use std::path::Path;

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 2;
    pub const PARAMETER: i32 = 3;
    pub const MISSING_ARTIFACT: i32 = 4;
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn new(code: i32, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }

    pub fn param(msg: impl Into<String>) -> Self {
        Self::new(exit::PARAMETER, msg)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(exit::IO, format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with `context`.
    pub fn context(self, context: impl fmt::Display) -> Self {
        Self { code: self.code, msg: format!("{context}: {}", self.msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

impl From<besov_sparse::Error> for CliError {
    fn from(e: besov_sparse::Error) -> Self {
        use besov_sparse::Error as E;
        let code = match &e {
            E::InvalidInput(_) | E::DegenerateScale(_) | E::DegenerateTestFunction | E::HypothesisViolation(_) => {
                exit::PARAMETER
            }
            E::Format { .. } | E::Io(_) => exit::IO,
            E::Calibration(_) => exit::NUMERICAL,
            E::CflViolation { dt_max, .. } => {
                return Self::new(exit::NUMERICAL, format!("{e}; suggested dt = {}", format::g17(*dt_max)));
            }
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
