use std::path::Path;

use homog_core::Error as CoreError;

/// Failures of the harness, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the stage that failed.
    pub fn at(self, stage: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{stage}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{stage}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{stage}: {m}")),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_solver_failure() {
            CliError::Solver(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        assert_eq!(CliError::Solver(String::new()).exit_code(), 3);
        assert_eq!(CliError::Io(String::new()).exit_code(), 4);
    }

    #[test]
    fn core_errors_split_by_kind() {
        let e: CliError = CoreError::Linear("breakdown".into()).into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = CoreError::Config("bad".into()).into();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn stage_prefix_keeps_kind() {
        let e = CliError::Solver("diverged".into()).at("fine solve");
        assert_eq!(e.to_string(), "fine solve: diverged");
        assert_eq!(e.exit_code(), 3);
    }
}
