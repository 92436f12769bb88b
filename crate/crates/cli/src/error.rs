use std::fmt::Display;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }

    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(path: &std::path::Path, e: impl Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}
