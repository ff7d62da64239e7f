use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no path between the requested street points")]
    NoPath,

    /// The caller should draw a fresh realization and try again.
    #[error("resample required: {0}")]
    Resample(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("calibration did not converge; last bracket [{lo}, {hi}]")]
    NonConvergence { lo: f64, hi: f64 },

    #[error("undefined regime: {0}")]
    UndefinedRegime(String),

    #[error("no timer drawn for the pair ({0}, {1})")]
    MissingTimer(u32, u32),

    #[error("unknown device id {0}")]
    UnknownDevice(u32),

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
