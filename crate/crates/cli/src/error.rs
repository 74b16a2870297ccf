use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const DIVERGED: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}:{}: {path}: {message}", line.map_or("?".to_string(), |l| l.to_string()))]
    Validation {
        file: String,
        line: Option<usize>,
        path: String,
        message: String,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => exit::SOLVER,
            _ => exit::VALIDATION,
        }
    }
}
