use thiserror::Error;

use crate::scenario::Tier;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("singular link: distance {0} m")]
    SingularLink(f64),

    #[error("non-positive frequency {0} Hz")]
    Frequency(f64),

    #[error("{tier:?} tier attenuation needs a positive altitude, got {z} m")]
    Altitude { tier: Tier, z: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("value matrix contains NaN at ({row}, {col})")]
    NanValue { row: usize, col: usize },

    #[error("backhaul association infeasible: {haps} HAPs but total station capacity {capacity}")]
    BackhaulCapacity { haps: usize, capacity: usize },

    #[error("utility of an empty user set")]
    EmptyUserSet,

    #[error("non-positive interference-plus-noise term {0}")]
    NonPositivePsi(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver output violates constraints: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
