use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid header: {message}")]
    Header { line: usize, message: String },

    #[error("pitch {pitch} is outside the piano range [21, 108]")]
    PitchRange { pitch: i32 },

    #[error("finger {0} is not in 1..=5")]
    FingerRange(i32),

    #[error("score has {len} notes, need at least {min}")]
    ScoreTooShort { len: usize, min: usize },

    #[error("score has {len} notes, exhaustive search supports at most {max}")]
    ScoreTooLong { len: usize, max: usize },

    #[error("pitch {pitch} is outside the encoding range [{min}, {max}]")]
    Encoding { pitch: i32, min: i32, max: i32 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible finger transition at note {index}: finger {from_finger} on {from_pitch} -> finger {to_finger} on {to_pitch}")]
    Infeasible {
        index: usize,
        from_finger: u8,
        from_pitch: i32,
        to_finger: u8,
        to_pitch: i32,
    },

    #[error("non-finite {what} at gradient step {step}")]
    Training { what: &'static str, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown experiment {0:?}, expected EX1..EX5")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
