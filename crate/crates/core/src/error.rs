use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// The evaluation point lies outside the loss domain (non-positive gamma
    /// predictor, non-positive-definite concentration matrix, ...).
    #[error("DomainViolation: {0}")]
    DomainViolation(String),

    /// A dataset or argument fails a structural invariant.
    #[error("invalid input: {0}")]
    InvalidData(String),

    /// An operation that needs a non-empty support set received an empty one.
    #[error("EmptySupport: the support set is empty")]
    EmptySupport,

    /// The restricted Hessian block could not be inverted.
    #[error("SingularRestrictedHessian: restricted Hessian block is singular")]
    SingularRestrictedHessian,

    /// Certificates being combined are anchored at different points.
    #[error("IncompatibleCenters: certificates are anchored at different points")]
    IncompatibleCenters,

    /// A required eigenvalue is non-positive where a positive one is needed.
    #[error("DegenerateSpectrum: {0}")]
    DegenerateSpectrum(String),

    /// No strictly feasible starting point could be produced for the solver.
    #[error("NoFeasibleStart: {0}")]
    NoFeasibleStart(String),

    /// A gamma design/parameter pair has min_i <x_i, beta*> <= 0.
    #[error("PredictorFloorViolation: minimum predictor {0} must be positive")]
    PredictorFloorViolation(f64),

    /// A matrix expected to be positive definite is not.
    #[error("NotPD: matrix is not positive definite")]
    NotPD,

    /// The deviation level lies outside the validity window of a tail bound;
    /// the caller must increase the sample count before the bound applies.
    #[error("TOutOfRange: t={t} outside the validity window (0, {limit})")]
    TOutOfRange { t: f64, limit: f64 },

    /// A model-specific constant needed by the operation was not supplied.
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
