use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Tied responses under the reject policy. Exact distribution-freeness
    /// needs a continuous error law, under which ties have probability zero.
    #[error(
        "{tied} tied values among {n} observations; rank tests assume no ties (use the midrank policy to override)"
    )]
    Ties { n: usize, tied: usize },

    #[error("degenerate variance estimate (constant data)")]
    DegenerateVariance,

    #[error("degenerate residuals: the linear model fits the data exactly")]
    DegenerateResiduals,

    #[error("exact enumeration of {n}! permutations exceeds the cap n <= {cap}; use Monte Carlo calibration")]
    Capacity { n: usize, cap: usize },

    #[error("design matrix is rank deficient (numerical rank {rank} < {p} columns)")]
    SingularDesign { rank: usize, p: usize },

    #[error("statistic overflows f64 (log statistic = {log_statistic})")]
    Overflow { log_statistic: f64 },

    #[error("unsupported error law: {0}")]
    UnsupportedLaw(String),

    #[error("malformed null table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
