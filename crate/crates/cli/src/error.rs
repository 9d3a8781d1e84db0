use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nntt::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CAPACITY: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(nntt::Error::Capacity(_)) => EXIT_CAPACITY,
            CliError::Core(nntt::Error::Io(_)) | CliError::Io(_) => EXIT_IO,
            CliError::Core(nntt::Error::DegenerateFit(_)) | CliError::Degenerate(_) => EXIT_DEGENERATE,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Attaches the path to I/O failures from the core crate.
pub(crate) fn at_path<T>(path: &std::path::Path, r: nntt::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        nntt::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Core(other),
    })
}

pub(crate) fn io<T>(path: &std::path::Path, r: std::io::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
