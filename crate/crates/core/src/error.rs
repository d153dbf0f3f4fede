use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("overflow: total absolute sum of the grid is not representable")]
    Overflow,
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate bandwidth: kernel support contains no lattice point")]
    DegenerateBandwidth,
    #[error("invalid scale {0}: must lie in (0, 1]")]
    InvalidScale(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty enumeration: no rectangle passes the scale filter")]
    EmptyEnumeration,
    #[error("kernel not supported for this statistic: {0}")]
    UnsupportedKernel(String),
    #[error("insufficient replications: {0}")]
    InsufficientReplications(String),
    #[error("calibration key mismatch: {0}")]
    CalibrationMismatch(String),
    #[error("fingerprint mismatch: stored under {stored}, key hashes to {computed}")]
    FingerprintMismatch { stored: String, computed: String },
    #[error("cache miss for key {0}")]
    CacheMiss(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("not in divergence regime: v = {0} must be < 1")]
    NotDivergent(f64),
    #[error("empty series")]
    EmptySeries,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
