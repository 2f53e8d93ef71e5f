use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("I - lambda*B is numerically singular at lambda = {lambda} (sigma_min = {sigma_min:e})")]
    SingularResolvent { lambda: Complex64, sigma_min: f64 },

    #[error("operator is numerically singular (sigma_min = {sigma_min:e})")]
    SingularOperator { sigma_min: f64 },

    #[error("resolvent norm {norm} exceeds the sector bound {bound} at lambda = {lambda}")]
    SectorViolation {
        lambda: Complex64,
        norm: f64,
        bound: f64,
    },

    #[error("basis condition estimate {cond:e} exceeds {limit:e}")]
    IllConditionedBasis { cond: f64, limit: f64 },

    #[error("unstable rank decision near eigenvalue {mu}: {detail}")]
    ChainAmbiguity { mu: Complex64, detail: String },

    #[error("{0}")]
    DomainError(String),

    #[error("{0}")]
    IndexError(String),

    #[error("limit probe did not converge: {0}")]
    NoConvergence(String),

    #[error("no admissible circle in ring ({inner}, {outer}) clears every pole radius by the required gap")]
    GapFailure { inner: f64, outer: f64 },

    #[error("quadrature stalled after {nodes} nodes (estimated error {est_error:e}, tolerance {tol:e})")]
    QuadratureStall {
        nodes: usize,
        est_error: f64,
        tol: f64,
    },

    #[error("contraction violated for initial vector #{h_index} at t = {t}: {detail}")]
    ContractionViolation {
        h_index: usize,
        t: f64,
        detail: String,
    },

    #[error("{what}: closed form and quadrature differ by {diff:e} (tolerance {tol:e})")]
    VerificationMismatch { what: String, diff: f64, tol: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("degenerate singular profile: {0}")]
    DegenerateProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable variant name, used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularResolvent { .. } => "SingularResolvent",
            Error::SingularOperator { .. } => "SingularOperator",
            Error::SectorViolation { .. } => "SectorViolation",
            Error::IllConditionedBasis { .. } => "IllConditionedBasis",
            Error::ChainAmbiguity { .. } => "ChainAmbiguity",
            Error::DomainError(_) => "DomainError",
            Error::IndexError(_) => "IndexError",
            Error::NoConvergence(_) => "NoConvergence",
            Error::GapFailure { .. } => "GapFailure",
            Error::QuadratureStall { .. } => "QuadratureStall",
            Error::ContractionViolation { .. } => "ContractionViolation",
            Error::VerificationMismatch { .. } => "VerificationMismatch",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::DegenerateProfile(_) => "DegenerateProfile",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Serialization(_) => "Serialization",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
