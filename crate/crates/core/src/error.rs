use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

/// Every failure the laboratory can report.
///
/// The variants split into configuration problems (the inputs are not a valid
/// experiment) and numerical diagnostics (the inputs are valid but the run hit
/// a condition it cannot resolve); see [`LabError::is_configuration`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unsupported system: {0}")]
    Unsupported(String),
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("degenerate event: {0}")]
    DegenerateEvent(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("non-generic interval exchange: {0}")]
    NonGeneric(String),
    #[error("degenerate orbit: {0}")]
    DegenerateOrbit(String),
    #[error("orbit hit a discontinuity: {0}")]
    Discontinuity(String),
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

impl LabError {
    /// True when the error means the experiment description itself is wrong.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            LabError::Config(_)
                | LabError::Invalid(_)
                | LabError::TypeMismatch(_)
                | LabError::Unsupported(_)
                | LabError::Scheme(_)
                | LabError::InvalidInterval(_)
                | LabError::DegenerateEvent(_)
        )
    }
}
