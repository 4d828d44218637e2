use std::path::PathBuf;

use crate::vehicle::Axle;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tire slip angle left the region where the tire model is defined.
    #[error("{axle} slip angle {angle:.4} rad is outside the validity domain (|angle| < {limit:.4} rad)")]
    SlipDomain { axle: Axle, angle: f64, limit: f64 },

    #[error("Dugoff shaping argument must be non-negative, got {0}")]
    NegativeShaping(f64),

    #[error("longitudinal velocity {vx} m/s is below the minimum of {min} m/s")]
    SpeedBelowMinimum { vx: f64, min: f64 },

    #[error("time {t} s is outside the profile horizon [0, {horizon}] s")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("invalid `{name}`: {reason}")]
    Invalid { name: String, reason: String },

    #[error("virtual control is singular: alpha3 = {0:e}")]
    SingularVirtualControl(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
