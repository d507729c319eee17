use serde_json::json;

/// Exit code for bad invocations and invalid configuration.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for numerical breakdown.
pub const EXIT_NUMERICAL: i32 = 2;
/// Exit code when `verify` finds a failing suite.
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] reltrace::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAILED,
            _ => EXIT_USAGE,
        }
    }

    /// Machine-readable diagnostic, printed to stderr for numerical failures.
    pub fn diagnostic(&self) -> serde_json::Value {
        match self {
            CliError::Core(reltrace::Error::Breakdown { message, condition }) => json!({
                "error": "numerical_breakdown",
                "message": message,
                "condition_estimate": if condition.is_finite() { json!(condition) } else { json!(null) },
            }),
            CliError::Core(e) if e.is_numerical() => json!({
                "error": "numerical_breakdown",
                "message": e.to_string(),
            }),
            other => json!({ "error": "usage", "message": other.to_string() }),
        }
    }
}
