use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("point is outside the domain: {0}")]
    OutsideDomain(String),

    #[error("not strictly plurisubharmonic: minimum Levi eigenvalue {0:e}")]
    NotStrictlyPsh(f64),

    #[error("level {eps} out of range (0, {eps_max})")]
    LevelOutOfRange { eps: f64, eps_max: f64 },

    #[error("boundary projection did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("outside zero-free region: Re Q = {0:e}")]
    OutsideZeroFreeRegion(f64),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("evaluation at the singular point")]
    Singularity,

    #[error("shell not hit after {0} proposals")]
    ShellNotHit(u64),

    #[error("empty cap: {0}")]
    EmptyCap(String),

    #[error("zonal calibration failed: relative error {0:e}")]
    Calibration(f64),

    #[error("variance guard: relative standard error {0:.4} near the boundary")]
    VarianceGuard(f64),

    #[error("not in H^{p}: scan verdict {verdict}")]
    NotInHp { p: f64, verdict: String },

    #[error("not in the intersection space: {0}")]
    NotInIntersection(String),

    #[error("coefficient search failed: {0}")]
    CoefficientSearch(String),

    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LabError::DimensionMismatch { expected, got })
    }
}
