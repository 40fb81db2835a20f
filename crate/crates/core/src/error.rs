use alloc::string::String;

/// Failures reported by the synthesis and evaluation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("(A, C_y) is not detectable")]
    NotDetectable,
    #[error("(A, B) is not stabilizable")]
    NotStabilizable,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("Riccati solver did not converge (relative residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("resolvent is singular at z = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },
    #[error("matrix is not positive definite")]
    NotPd,
    #[error("iteration cap of {iterations} reached (last relative change {change:e})")]
    IterationCap { iterations: usize, change: f64 },
    #[error("spectral density sample {index} is not positive")]
    NonPositiveSample { index: usize },
    #[error("gamma {gamma} does not exceed the largest eigenvalue {lambda_max}")]
    GammaTooSmall { gamma: f64, lambda_max: f64 },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
    #[error("no feasible order up to {0}")]
    OrderCapExceeded(usize),
    #[error("polynomial root of modulus {0} lies too close to the unit circle")]
    RootNearCircle(f64),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("filter state matrix has spectral radius {0} >= 1")]
    InstabilityDetected(f64),
    #[error("horizon {horizon} exceeds the dimension cap {cap}")]
    HorizonTooLarge { horizon: usize, cap: usize },
    #[error("only scalar target signals (d_s = 1) are supported here, got d_s = {0}")]
    UnsupportedDimension(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
