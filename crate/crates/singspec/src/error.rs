use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series tail bound unavailable: coefficient ratios do not stabilize")]
    TailBoundUnavailable,
    #[error("log escalation exceeded template bound at exponent {exponent}: log power {found} > {bound}")]
    ResonanceOverflow { exponent: i64, found: usize, bound: usize },
    #[error("truncation {got} too small (need at least {need})")]
    TruncationTooSmall { need: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("form limit at the singular point does not exist")]
    DivergentLimit,
    #[error("cut point coincides with the endpoint or lies outside it")]
    DegenerateCut,
    #[error("form Gram matrix is not congruent to the target (rank {rank}, need {need})")]
    RankDeficient { rank: usize, need: usize },
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("boundary data is not consistent with the maximal domain: {0}")]
    NotInMaximalDomain(String),
    #[error("integration step failed at x = {x}: {reason}")]
    StepFailure { x: f64, reason: String },
    #[error("characteristic system is not square: {rows} x {cols}")]
    NonSquareSystem { rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
