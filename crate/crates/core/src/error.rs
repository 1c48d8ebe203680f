use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Domain(String),

    #[error("feature matrix is singular (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("rollout diverged at step {step}")]
    Divergence { step: usize },

    #[error("trajectory mismatch: {0}")]
    Mismatch(String),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty grid")]
    EmptyGrid,

    #[error("unknown skill `{0}`")]
    UnknownSkill(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session `{0}` is already complete")]
    SessionComplete(String),

    #[error("invalid via points: {}", .0.join("; "))]
    InvalidPoints(Vec<String>),

    #[error("record `{participant}` has no phase P{phase}")]
    MissingPhase { participant: String, phase: u8 },

    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
