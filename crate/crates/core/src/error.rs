use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("extension parameter T must exceed 1, got {0}")]
    TleOne(String),
    #[error("no sample half-count m <= {limit} makes 2Tm an integer with M >= N")]
    Infeasible { limit: u64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dense problem of size {rows}x{cols} exceeds the oracle budget")]
    TooLarge { rows: usize, cols: usize },
    #[error("eigenvalue index range {lo}..={hi} out of range for size {size}")]
    IndexOutOfRange { lo: usize, hi: usize, size: usize },
    #[error("inverse iteration did not converge for eigenvalue index {index}")]
    ConvergenceFailure { index: usize },
    #[error("plunge window [{lo}, {hi}] failed validation after widening")]
    WindowOverflow { lo: usize, hi: usize },
    #[error("singular values not monotone at window position {position}")]
    MappingMismatch { position: usize },
    #[error("sketch projection residual {residual:e} exceeds bound {bound:e}")]
    RankDeficientSketch { residual: f64, bound: f64 },
    #[error("randomized sketch failed after retry")]
    SketchFailure,
    #[error("residual {residual:e} exceeds {bound:e}: N is too small for this function")]
    NotConverged { residual: f64, bound: f64 },
    #[error("moment quadrature accuracy {estimate:e} is worse than tau {tau:e}")]
    QuadratureWarning { estimate: f64, tau: f64 },
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
