use std::path::PathBuf;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config error: {0}")]
    ConfigFile(String),
    #[error("{failed} validation check(s) failed")]
    Validation { failed: usize },
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] herding_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config { .. } | CliError::ConfigFile(_) => EXIT_CONFIG,
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            CliError::Input { .. } | CliError::Io { .. } => EXIT_FAILURE,
            CliError::Core(herding_core::Error::InvalidArgument(_)) => EXIT_CONFIG,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
