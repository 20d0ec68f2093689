use std::path::PathBuf;

use thiserror::Error;

use crate::population::ActionKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density {0} is outside [0, 1]")]
    InvalidDensity(f64),

    #[error("horizon must be at least {min}, got {got}")]
    HorizonTooShort { min: usize, got: usize },

    #[error("population must contain at least one particle")]
    EmptyPopulation,

    #[error("time index {k} out of range 1..={max}")]
    TimeOutOfRange { k: usize, max: usize },

    #[error("particle id {id} out of range 1..={max}")]
    UnknownParticle { id: usize, max: usize },

    #[error("particle {id} is not eligible for {kind:?} at k={k}: {reason}")]
    NotEligible {
        id: usize,
        k: usize,
        kind: ActionKind,
        reason: &'static str,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("population horizon {population} does not match target horizon {target}")]
    HorizonMismatch { population: usize, target: usize },

    #[error("unsupported bundle schema version {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },

    #[error("malformed input {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
