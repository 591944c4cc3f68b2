use thiserror::Error;

/// Errors raised by the library. Diagnostics-only operations never fail.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sets must be bounded away from the origin (r_lo = {0})")]
    TouchesOrigin(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolution must be at least 1")]
    BadResolution,

    #[error("empty truncation: both measures vanish on the truncation region")]
    EmptyTruncation,

    #[error("unbalanced: source mass {source_mass} and target mass {target_mass} differ")]
    Unbalanced { source_mass: f64, target_mass: f64 },

    #[error("oracle limit exceeded: {cells} tableau cells (max 30)")]
    OracleLimitExceeded { cells: usize },

    #[error("not cyclically monotone")]
    NotCyclicallyMonotone,

    #[error("domain violation at atom {index}: {detail}")]
    DomainViolation { index: usize, detail: String },

    #[error("empty support")]
    EmptySupport,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
