use mmse_core::MmseError;
use thiserror::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    CertificateFailure = 1,
    Validation = 2,
    NonConvergence = 3,
    Refusal = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Library(#[from] MmseError),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => ExitStatus::Validation,
            CliError::Library(MmseError::GuardRefusal(_)) => ExitStatus::Refusal,
            CliError::Library(MmseError::Internal(_)) => ExitStatus::NonConvergence,
            CliError::Library(_) => ExitStatus::Validation,
        }
    }
}
