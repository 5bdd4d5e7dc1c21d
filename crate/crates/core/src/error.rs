use thiserror::Error;

/// Errors raised by dataset validation, estimation and interval construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset contains no studies")]
    EmptyDataset,
    #[error("no study has a control-arm event; at least one x > 0 is required")]
    AllZeroControl,
    #[error("no study has a treatment-arm event; at least one y > 0 is required")]
    AllZeroTreatment,
    #[error("study {index}: {reason}")]
    MalformedCounts { index: usize, reason: String },
    #[error("probability {0} is not strictly inside (0, 1)")]
    DegenerateProbability(f64),
    #[error("per-study log odds ratios differ (spread {spread:e}); not a common odds ratio")]
    HeterogeneousTheta { spread: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("no study has events in both arms")]
    NoNonzeroStudy,
    #[error("estimate is undefined: {0}")]
    UndefinedEstimate(String),
    #[error("objective could not be evaluated at the initial point")]
    OptimizerFailure,
    #[error("no grid point accepted (smallest T = {min_t:.4} at theta = {argmin_theta:.4})")]
    EmptyConfidenceSet { min_t: f64, argmin_theta: f64 },
    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
