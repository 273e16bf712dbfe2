use thiserror::Error;

/// Errors raised by the complexity and response pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("generator kind mismatch: {0}")]
    KindMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),

    #[error("no cost weight for generator `{0}`")]
    MissingWeight(String),

    #[error("operation requires a quadratic Hamiltonian")]
    NonQuadratic,

    #[error("operation requires a Gaussian Wigner state")]
    NonGaussian,

    #[error("generator span is not closed under commutation (residual {0:e})")]
    NotClosed(f64),

    #[error("dimension {dim} exceeds solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("target lies outside the group generated by the generator set (residual {0:e})")]
    TargetOutsideGroup(f64),

    #[error("geodesic solver did not converge (best endpoint residual {0:e})")]
    NonConvergence(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("non-positive eigenvalue {value:e} at t = {time}")]
    DegenerateSpectrum { value: f64, time: f64 },

    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("integration step underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("relative energy drift {0:e} exceeds tolerance")]
    EnergyDrift(f64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
