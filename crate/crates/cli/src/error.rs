use serde_json::{json, Value};
use thiserror::Error;

/// Exit status for each failure class. Also listed in the README.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const INVALID_INPUT: i32 = 3;
    pub const TIES: i32 = 4;
    pub const DEGENERATE: i32 = 5;
    pub const CAPACITY: i32 = 6;
    pub const UNSUPPORTED_LAW: i32 = 7;
    pub const SINGULAR_DESIGN: i32 = 8;
    pub const OVERFLOW: i32 = 9;
    pub const TABLE: i32 = 10;
    pub const IO: i32 = 11;
    pub const SEED_REQUIRED: i32 = 12;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rankos::Error),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{0}")]
    Usage(String),

    #[error("--seed is required for {0} when not running interactively")]
    SeedRequired(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        use rankos::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => "invalid_argument",
                E::Ties { .. } => "ties",
                E::DegenerateVariance => "degenerate_variance",
                E::DegenerateResiduals => "degenerate_residuals",
                E::Capacity { .. } => "capacity",
                E::SingularDesign { .. } => "singular_design",
                E::Overflow { .. } => "overflow",
                E::UnsupportedLaw(_) => "unsupported_law",
                E::Table(_) => "table",
                E::Io(_) => "io",
            },
            CliError::Input(_) => "invalid_input",
            CliError::Usage(_) => "usage",
            CliError::SeedRequired(_) => "seed_required",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use rankos::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => exit::INVALID_INPUT,
                E::Ties { .. } => exit::TIES,
                E::DegenerateVariance | E::DegenerateResiduals => exit::DEGENERATE,
                E::Capacity { .. } => exit::CAPACITY,
                E::SingularDesign { .. } => exit::SINGULAR_DESIGN,
                E::Overflow { .. } => exit::OVERFLOW,
                E::UnsupportedLaw(_) => exit::UNSUPPORTED_LAW,
                E::Table(_) => exit::TABLE,
                E::Io(_) => exit::IO,
            },
            CliError::Input(_) => exit::INVALID_INPUT,
            CliError::Usage(_) => exit::USAGE,
            CliError::SeedRequired(_) => exit::SEED_REQUIRED,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}
