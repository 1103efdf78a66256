use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("separability required")]
    NotSeparable,

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("empty erosion (eps = {eps}); reduce eps")]
    EmptyErosion { eps: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix of size {n} exceeds the dense limit {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("{count} eigenvalues below the cutoff exceed the configured limit {limit}")]
    PartialLimit { count: usize, limit: usize },

    #[error("certification failed: solver returned {found} eigenvalues, inertia count is {expected}")]
    CertificationFailed { found: usize, expected: usize },

    #[error("factorization broke down at shift {shift} after {attempts} perturbations")]
    Breakdown { shift: f64, attempts: usize },

    #[error("window support {support} wraps around the periodic box of side {period}")]
    WindowWraps { support: f64, period: f64 },

    #[error("phase-space function does not belong to this frame")]
    FrameMismatch,

    #[error("matrix is not symmetric (defect {defect:e})")]
    Asymmetric { defect: f64 },

    #[error("uncertified tail: spectrum cutoff {cutoff} is below lambda = {lambda}")]
    UncertifiedTail { cutoff: f64, lambda: f64 },

    #[error("all remainders in the fit window are zero")]
    AllZeroRemainder,

    #[error("need at least {needed} samples with nonzero remainder, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
