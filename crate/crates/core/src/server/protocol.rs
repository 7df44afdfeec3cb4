//! Wire messages: newline-delimited JSON objects with the fields `type`,
//! `session_id`, `seq`, `ts` and `payload`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::seat::SeatId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Join,
    Configure,
    StartPhase,
    Tick,
    ActivitySample,
    SetListen,
    PedalInput,
    SliderInput,
    Annotation,
    StateUpdate,
    DotUpdate,
    Error,
    EndSession,
}

impl MessageType {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::Join => "join",
            MessageType::Configure => "configure",
            MessageType::StartPhase => "start_phase",
            MessageType::Tick => "tick",
            MessageType::ActivitySample => "activity_sample",
            MessageType::SetListen => "set_listen",
            MessageType::PedalInput => "pedal_input",
            MessageType::SliderInput => "slider_input",
            MessageType::Annotation => "annotation",
            MessageType::StateUpdate => "state_update",
            MessageType::DotUpdate => "dot_update",
            MessageType::Error => "error",
            MessageType::EndSession => "end_session",
        }
    }

    /// Types only the server sends.
    pub fn is_outbound_only(self) -> bool {
        matches!(self, MessageType::StateUpdate | MessageType::DotUpdate | MessageType::Error)
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolMessage {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub session_id: String,
    /// Assigned by the server; any value a client sends is ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default)]
    pub ts: u64,
    #[serde(default)]
    pub payload: Value,
}

impl ProtocolMessage {
    pub fn new(kind: MessageType, session_id: impl Into<String>, payload: Value) -> Self {
        ProtocolMessage { kind, session_id: session_id.into(), seq: None, ts: 0, payload }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::malformed(e.to_string()))
    }
}

/// What a connection is allowed to see and do.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientRole {
    Participant(SeatId),
    Observer(String),
    Coder,
    Monitor,
}

impl ClientRole {
    pub fn is_participant(&self) -> bool {
        matches!(self, ClientRole::Participant(_))
    }
}

/// Who submitted an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    /// The server itself: clock ticks, scheduled phase changes, simulators.
    Server,
    Client(BTreeSet<ClientRole>),
}

impl Origin {
    pub fn client(roles: impl IntoIterator<Item = ClientRole>) -> Self {
        Origin::Client(roles.into_iter().collect())
    }

    pub fn has(&self, role: &ClientRole) -> bool {
        match self {
            Origin::Server => true,
            Origin::Client(roles) => roles.contains(role),
        }
    }

    pub fn has_any(&self, pred: impl Fn(&ClientRole) -> bool) -> bool {
        match self {
            Origin::Server => true,
            Origin::Client(roles) => roles.iter().any(pred),
        }
    }

    pub fn is_server(&self) -> bool {
        matches!(self, Origin::Server)
    }
}

/// Payload of a client `join`: either a participant seat or another role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<ClientRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seat: Option<SeatId>,
    #[serde(default)]
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_expected_share: Option<f64>,
}

impl JoinRequest {
    pub fn resolved_role(&self) -> Result<ClientRole> {
        match (&self.role, self.seat) {
            (Some(ClientRole::Participant(a)), Some(b)) if *a != b => {
                Err(Error::malformed("join seat disagrees with participant role"))
            }
            (Some(role), _) => Ok(role.clone()),
            (None, Some(seat)) => Ok(ClientRole::Participant(seat)),
            (None, None) => Err(Error::malformed("join needs a seat or a role")),
        }
    }
}
