use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse failure at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("empty file: no data rows")]
    EmptyFile,

    #[error("invalid group spec: {0}")]
    GroupSpec(String),

    #[error("invalid dataset: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("d ≥ 2 required (got d = {0})")]
    TooFewGroups(usize),

    #[error("U-centering requires n ≥ 4 (got n = {0})")]
    TooFewForU(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mixed centering kinds in one statistic")]
    MixedKinds,

    #[error("c must be nonnegative and finite (got {0})")]
    NegativeC(f64),

    #[error("degenerate group '{0}': distance variance is (numerically) zero")]
    DegenerateGroup(String),

    #[error("d = {0} too large: set-partition enumeration limited to d ≤ {max} (Bell-number growth)", max = crate::partition::MAX_PARTITION_SIZE)]
    CombinatorialExplosion(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("regression failed: {0}")]
    RankDeficient(String),
}

pub type Result<T> = std::result::Result<T, Error>;
