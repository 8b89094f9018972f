use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rejection sampling gave up after {attempts} attempts: {reason}")]
    SamplingExhausted { attempts: usize, reason: String },

    #[error("component centre of mass {0:.3e} m away from body origin")]
    CenterOfMassOffset(f64),

    #[error("negative thrust {value} on motor {motor}")]
    NegativeThrust { motor: usize, value: f64 },

    #[error("non-finite state after integration step")]
    NonFiniteState,

    #[error("reflection in orthogonalization (det = {0})")]
    Reflection(f64),

    #[error("settling time {settling} s shorter than 4·dt = {min} s")]
    SettlingTooShort { settling: f64, min: f64 },

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-finite loss in update")]
    NonFiniteLoss,

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("log too short: need {needed} samples, have {have}")]
    LogTooShort { needed: usize, have: usize },

    #[error("logs misaligned: {0}")]
    Misaligned(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
