use std::fmt;
use std::path::Path;

use ldpc_replica::error::Error;

/// Process exit codes. Command-line parse errors exit with clap's code 2.
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    /// Bad parameters or an invalid channel spec.
    Validation(String),
    /// A solver did not converge or a bracket was missing.
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Convergence(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Bracket(_) => CliError::Convergence(format!(
                "{e}; widen the search interval or check that the ensemble and channel \
                 family actually cross the threshold inside it"
            )),
            Error::Convergence { .. } | Error::ResampleExhausted { .. } => {
                CliError::Convergence(e.to_string())
            }
            Error::InvalidEnsemble { .. }
            | Error::Domain { .. }
            | Error::Config(_)
            | Error::MalformedChannel(_)
            | Error::Validation(_) => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
