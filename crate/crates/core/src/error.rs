use thiserror::Error;

/// Errors raised by the simulator, codecs, and trainer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("no satellite is visible at t = {time} s")]
    NoVisibleSatellite { time: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("payload of {requested} bits exceeds capacity of {capacity} bits")]
    Capacity { requested: usize, capacity: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{field}: {message}")]
    Config { field: String, message: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
