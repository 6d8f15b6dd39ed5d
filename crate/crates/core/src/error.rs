use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {what} at position {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error(
        "coupling matrix is not symmetric: |J[{i}][{j}] - J[{j}][{i}]| = {diff:e} exceeds {tol:e}"
    )]
    Asymmetric {
        i: usize,
        j: usize,
        diff: f64,
        tol: f64,
    },
    #[error("index set mismatch: {0}")]
    IndexMismatch(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid subset request: size {s} out of range for parent of size {m}")]
    InvalidSubset { m: usize, s: usize },
    #[error("power iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("{what} of size {size} exceeds the enumeration limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("support violation: q is zero where p is positive (index {index})")]
    SupportViolation { index: usize },
    #[error("rejection sampler exceeded {max_tries} tries without acceptance")]
    MaxTriesExceeded { max_tries: u64 },
    #[error("recursion depth {depth} exceeds the configured cap {cap}")]
    MaxDepthExceeded { depth: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("chain is not reversible: detailed-balance residual {residual:e}")]
    NonReversible { residual: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown suite: {0}")]
    UnknownSuite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the error class; 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } => 2,
            Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::Asymmetric { .. }
            | Error::IndexMismatch(_)
            | Error::InvalidPartition(_)
            | Error::InvalidSubset { .. }
            | Error::InvalidConfig(_)
            | Error::UnknownSuite(_) => 3,
            Error::MaxTriesExceeded { .. } | Error::MaxDepthExceeded { .. } => 4,
            Error::TooLarge { .. } => 5,
            Error::NotConverged { .. }
            | Error::SupportViolation { .. }
            | Error::NonReversible { .. } => 6,
        }
    }
}
