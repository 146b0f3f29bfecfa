use gasket::Error;

/// Failure classes with stable exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Contract(String),
    #[error("failing experiments: {}", .0.join(", "))]
    Failed(Vec<String>),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Contract(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Contract(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::OutOfDomain { .. } | Error::LevelTooDeep { .. } => CliError::Domain(msg),
            Error::InvalidAddress(_) | Error::ModeMismatch(_) => CliError::Parse(msg),
            _ => CliError::Contract(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(format!("malformed JSON: {e}"))
    }
}
