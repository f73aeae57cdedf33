use thiserror::Error;

#[derive(Debug, Error)]
pub enum DegwaveError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("singular integrand: x^{beta} with nonzero value at x = 0")]
    SingularIntegrand { beta: f64 },
    #[error("boundary condition violated: {0}")]
    BoundaryCondition(String),
    #[error("grid too coarse: need N >= 4, got {0}")]
    GridTooCoarse(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("unsupported regime: alpha = 1 is excluded")]
    AlphaOne,
    #[error("norm equivalence not applicable at critical mu")]
    CriticalMu,
    #[error("eigen request out of range: k = {k}, active size = {n}")]
    EigenRange { k: usize, n: usize },
    #[error("transform-domain error: {0}")]
    TransformDomain(String),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("undefined quotient: initial energy is zero")]
    ZeroEnergy,
    #[error("trajectory does not store states at stride 1")]
    MissingStates,
    #[error("control signal grid mismatch: expected {expected} samples, got {got}")]
    ControlGridMismatch { expected: usize, got: usize },
    #[error("not controllable at this horizon: {0}")]
    BelowThreshold(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DegwaveError>;
