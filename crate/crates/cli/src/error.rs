use lineage_core::Error as CoreError;

/// Process-level error with a stable exit-code mapping:
/// 0 pass, 1 test failure, 2 config error, 3 numerics error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerics error: {0}")]
    Numerics(String),
    #[error("verification failed: {0}")]
    TestFailure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::TestFailure(_) => 1,
            CliError::Config(_) | CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Numerics(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numerics(_)
            | CoreError::PopulationCap { .. }
            | CoreError::DegenerateConditioning { .. } => CliError::Numerics(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
