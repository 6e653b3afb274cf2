//! Command implementations and file formats behind the `matmix` binary.

pub mod commands;
pub mod dto;
pub mod io;

/// CLI failure carrying its process exit code: 2 for schema/validation
/// problems, 3 when every requested fit failed, 4 for I/O.
#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Fit(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "validation error: {m}"),
            CliError::Fit(m) => write!(f, "fit error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
