use thiserror::Error;

/// Errors raised by the geometric kernel and the builders on top of it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integrator did not converge after {steps} steps")]
    NonConvergence { steps: usize },
    #[error("trajectory left the field domain at time {time}")]
    Escape { time: f64 },
    #[error("point is not covered by any partition-of-unity ball")]
    Uncovered,
    #[error("invalid group action: {0}")]
    InvalidAction(String),
    #[error("not convenient: {0}")]
    NotConvenient(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not a submersion: {0}")]
    NotSubmersion(String),
    #[error("build error in stratum {stratum}: {detail}")]
    Build { stratum: String, detail: String },
    #[error("refused: {0}")]
    Refused(String),
    #[error("equivariance defect: {0}")]
    EquivarianceDefect(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
