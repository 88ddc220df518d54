use decomp_lab::LabError;
use thiserror::Error;

/// Process exit codes. These values are a stable contract for scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Internal = 1,
    Config = 2,
    NonConvergence = 3,
    Visibility = 4,
    VerificationFailed = 5,
    Precondition = 6,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ExitCode::Config, message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        let code = match &e {
            LabError::NonConvergence { .. } | LabError::TaskNonConvergence { .. } => ExitCode::NonConvergence,
            LabError::FragmentVisibilityViolation(_) => ExitCode::Visibility,
            LabError::PreconditionFailed(_) | LabError::SymmetryAbsent { .. } => ExitCode::Precondition,
            LabError::SolverFailure(_) | LabError::NonFinite { .. } => ExitCode::Internal,
            _ => ExitCode::Config,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitCode::Internal, format!("io: {e}"))
    }
}

/// Reads a JSON file into `T`, reporting parse errors (which name the
/// offending field for unknown or mistyped keys) as config errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}
