use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("degenerate test function: B^eps_(1,1) norm vanishes")]
    DegenerateTestFunction,

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("time step {dt} exceeds the admissible step {dt_max}")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
