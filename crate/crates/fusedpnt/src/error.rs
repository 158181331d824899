use fusedpnt_core::Error as CoreError;

/// Front-end failure, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("infeasible: {0}")]
    Feasibility(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Feasibility(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InsufficientVisibility { .. } | CoreError::BelowHorizon { .. } | CoreError::OutOfBand { .. } => {
                CliError::Geometry(msg)
            }
            CoreError::Saturation(_) => CliError::Feasibility(msg),
            _ => CliError::Parse(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
