use std::fmt;

use serde::{Deserialize, Serialize};

/// Session lifecycle. Moves strictly forward, one step at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionPhase {
    Lobby,
    PreIntervention,
    Intervention,
    Debrief,
    Closed,
}

impl SessionPhase {
    pub const CHAIN: [SessionPhase; 5] = [
        SessionPhase::Lobby,
        SessionPhase::PreIntervention,
        SessionPhase::Intervention,
        SessionPhase::Debrief,
        SessionPhase::Closed,
    ];

    pub fn next(self) -> Option<SessionPhase> {
        match self {
            SessionPhase::Lobby => Some(SessionPhase::PreIntervention),
            SessionPhase::PreIntervention => Some(SessionPhase::Intervention),
            SessionPhase::Intervention => Some(SessionPhase::Debrief),
            SessionPhase::Debrief => Some(SessionPhase::Closed),
            SessionPhase::Closed => None,
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn is_closed(self) -> bool {
        self == SessionPhase::Closed
    }
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
