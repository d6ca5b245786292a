use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block scheme: n = {n} with block length {block_len} leaves no complete block")]
    InvalidScheme { n: u64, block_len: u64 },

    #[error("invalid block rule: {0}")]
    InvalidRule(String),

    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("association violated: {0}")]
    AssociationViolation(String),

    #[error("covariance matrix is not positive semidefinite (pivot {pivot:e} at row {row})")]
    CovarianceNotPsd { row: usize, pivot: f64 },

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("unregistered monotone map `{0}`")]
    UnknownMap(String),

    #[error("degenerate variance: {0} is zero")]
    DegenerateVariance(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few replicates: need at least {needed}, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("no analytic covariance available for {0}")]
    NoAnalyticCovariance(String),

    #[error("family is not centered (analytic mean {0})")]
    NotCentered(f64),

    #[error("normalizer `{normalizer}` is unavailable for this family: {reason}")]
    NormalizerUnavailable { normalizer: String, reason: String },

    #[error("sample budget exceeded: {values} values requested, limit {limit} (set allow_large to override)")]
    BudgetExceeded { values: u128, limit: u128 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
