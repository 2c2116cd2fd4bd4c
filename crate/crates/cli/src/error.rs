use std::fmt;

/// Front-end failure, grouped by the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data; exits with code 2.
    Validation(String),
    /// The optimizer could not finish a day; exits with code 3.
    Solver(String),
    /// A file could not be read or written; exits with code 4.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }

    /// Attaches a file path to an OS-level error.
    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<aggsim_core::error::Error> for CliError {
    fn from(e: aggsim_core::error::Error) -> Self {
        use aggsim_core::error::Error;
        match e {
            Error::SolverFailure { .. } | Error::DayAborted { .. } => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
