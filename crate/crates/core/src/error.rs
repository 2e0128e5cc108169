use thiserror::Error;

/// Errors raised anywhere in the model, simulation, or I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rotor contacts stator: eccentricity degree {0} must be < 1")]
    RotorContact(f64),

    #[error("invalid eccentricity: {0}")]
    InvalidEccentricity(String),

    #[error("index out of range: {what} = {index} (valid 1..={max})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("inductance matrix is not positive definite at t = {t} s, theta = {theta} rad")]
    SingularInductance { t: f64, theta: f64 },

    #[error("step size underflow at t = {t} s (h = {h:e}); problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },

    #[error("spectrum window too short: {0}")]
    WindowTooShort(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
