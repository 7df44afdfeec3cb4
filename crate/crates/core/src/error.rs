use thiserror::Error;

use crate::config::Violation;
use crate::phase::SessionPhase;
use crate::seat::SeatId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },

    #[error("{kind} not permitted during {phase}")]
    PhaseViolation { kind: String, phase: SessionPhase },

    #[error("session already closed")]
    AlreadyClosed,

    #[error("unknown seat {0}")]
    UnknownSeat(SeatId),

    #[error("unknown channel {0}")]
    UnknownChannel(u32),

    #[error("source {source_id} is not assigned to seat {target}")]
    UnauthorizedSource { source_id: String, target: SeatId },

    #[error("seat {0} is not a feedback recipient")]
    NotARecipient(SeatId),

    #[error("no valid assignment exists for {n_seats} seats")]
    NoValidAssignment { n_seats: u32 },

    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("log setup does not match the supplied configuration")]
    ConfigMismatch,

    #[error("unknown event kind `{0}`")]
    UnknownKind(String),

    #[error("malformed payload: {0}")]
    MalformedPayload(String),

    #[error("empty window")]
    EmptyWindow,

    #[error("empty input")]
    EmptyInput,

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code carried in protocol `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SequenceGap { .. } => "SequenceGap",
            Error::PhaseViolation { .. } => "PhaseViolation",
            Error::AlreadyClosed => "AlreadyClosed",
            Error::UnknownSeat(_) => "UnknownSeat",
            Error::UnknownChannel(_) => "UnknownChannel",
            Error::UnauthorizedSource { .. } => "UnauthorizedSource",
            Error::NotARecipient(_) => "NotARecipient",
            Error::NoValidAssignment { .. } => "NoValidAssignment",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ConfigMismatch => "ConfigMismatch",
            Error::UnknownKind(_) => "UnknownKind",
            Error::MalformedPayload(_) => "MalformedPayload",
            Error::EmptyWindow => "EmptyWindow",
            Error::EmptyInput => "EmptyInput",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn phase(kind: &str, phase: SessionPhase) -> Self {
        Error::PhaseViolation { kind: kind.to_string(), phase }
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedPayload(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
