use std::fmt;

use strip_anderson::Error as CoreError;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs or inconsistent files.
    Parameter(String),
    /// A computation that broke down or a bound that was violated.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parameter(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn param(msg: impl Into<String>) -> Self {
        CliError::Parameter(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parameter(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::Domain(_) | CoreError::Statistics(_) => {
                CliError::Parameter(e.to_string())
            }
            CoreError::Numerical(_) | CoreError::BoundViolation(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parameter(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Parameter(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parameter(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
