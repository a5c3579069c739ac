use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty statistic column")]
    EmptyColumn,

    #[error("no informative statistics (every statistic column has zero MAD)")]
    NoInformativeStatistics,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("statistic names do not match the reference table: {0}")]
    NameMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty effective table after exclusion")]
    EmptyEffectiveTable,

    #[error("more replicates than simulations (M = {m}, n = {n})")]
    TooManyReplicates { m: usize, n: usize },

    #[error("regression needs at least {needed} accepted rows, got {actual}")]
    TooFewAccepted { needed: usize, actual: usize },

    #[error("simulator failed at theta = {theta:?}: {message}")]
    Simulation { theta: Vec<f64>, message: String },

    #[error("not enough usable statistics for PCA: need 2, have {0}")]
    TooFewStatistics(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
