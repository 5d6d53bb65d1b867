use thiserror::Error;

#[derive(Debug, Error)]
pub enum EtpcError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asym:.3e})")]
    NotSymmetric { asym: f64 },

    #[error("matrix is not positive definite (min eigenvalue {lambda_min:.3e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("not Schur stable (spectral radius {rho:.6})")]
    NotSchurStable { rho: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("basis not independent on horizon [0, {n}]")]
    BasisNotIndependent { n: usize },

    #[error("basis must have a constant nonzero phi_0 and phi_j(0) = 0 for j >= 1")]
    BasisZeroPattern,

    #[error("constraint horizon M = {m} exceeds prediction horizon N = {n}")]
    ConstraintHorizonTooLong { m: usize, n: usize },

    #[error("invalid parameter: {context}")]
    InvalidParameter { context: String },

    #[error("singular linear system: {context}")]
    SingularSystem { context: String },

    #[error("insufficient events: trace has {have} inter-event intervals, need {need}")]
    InsufficientEvents { have: usize, need: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EtpcError>;
