use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix not positive definite: pivot {pivot} at index {index}")]
    NotSpd { pivot: f64, index: usize },
    #[error("singular system")]
    Singular,
    #[error("right-hand side leaves the range (null component {null_component}, norm {rhs_norm})")]
    OutOfRange { null_component: f64, rhs_norm: f64 },
    #[error("degenerate constraint system: row {0} reads 0 = nonzero")]
    DegenerateSystem(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("constraint matrix is not of the form [I | D]")]
    NotStandardForm,
    #[error("step size {eta} outside (0, {upper})")]
    BadEta { eta: f64, upper: f64 },
    #[error("empty step-size interval: low {low} >= high {high}")]
    EmptyInterval { low: f64, high: f64 },
    #[error("step size {eta} outside the admissible interval ({low}, {high})")]
    EtaOutsideInterval { eta: f64, low: f64, high: f64 },
    #[error("noise scale must be positive")]
    ZeroSigma,
    #[error("Rényi order must exceed 1, got {0}")]
    BadAlpha(f64),
    #[error("constant C = {c} exceeds 1/(α(α−1)) = {limit}")]
    WeakConvexityPreconditionViolated { c: f64, limit: f64 },
    #[error("objective is not quadratic")]
    NonQuadratic,
    #[error("covariances differ by {0}")]
    CovarianceMismatch(f64),
    #[error("solvers disagree: {0}")]
    NotConverged(String),
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
    #[error("no convergence detected within {0} iterations")]
    NeverConverged(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("serialization: {0}")]
    Serde(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
