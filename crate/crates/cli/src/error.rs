use std::fmt;

use hea_core::Error;

/// CLI failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration and input files.
    Config(String),
    /// Failure inside a library stage.
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) if e.is_numerical() => write!(f, "numerical error: {e}"),
            CliError::Core(e) => write!(f, "input error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
