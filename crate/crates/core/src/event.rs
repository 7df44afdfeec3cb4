//! Event records: the unit of replay and audit.
//!
//! On disk a record is one JSON object with exactly the fields `seq`, `tick`,
//! `kind` and `payload`. `kind` is drawn from the closed set in
//! [`Event::KINDS`]; anything else is rejected with [`Error::UnknownKind`].

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::metrics::CodedValue;
use crate::phase::SessionPhase;
use crate::routing::HeardEdge;
use crate::seat::SeatId;
use crate::tic::PedalInput;
use crate::vc::SliderInput;

/// One seat's speaking level for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivitySample {
    pub seat: SeatId,
    pub tick: u64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinPayload {
    pub seat: SeatId,
    #[serde(default)]
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_expected_share: Option<f64>,
}

/// Coder output or a free-text narrative attached to the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coded: Option<CodedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Configure(SessionConfig),
    Join(JoinPayload),
    StartPhase {
        phase: SessionPhase,
    },
    /// Closes the current tick. Simulation sessions record who heard whom.
    Tick {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heard: Option<Vec<HeardEdge>>,
    },
    ActivitySample(ActivitySample),
    SetListen {
        seat: SeatId,
        channel: SeatId,
    },
    PedalInput(PedalInput),
    SliderInput(SliderInput),
    Annotation(AnnotationPayload),
    EndSession {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
}

impl Event {
    pub const KINDS: [&'static str; 10] = [
        "configure",
        "join",
        "start_phase",
        "tick",
        "activity_sample",
        "set_listen",
        "pedal_input",
        "slider_input",
        "annotation",
        "end_session",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            Event::Configure(_) => "configure",
            Event::Join(_) => "join",
            Event::StartPhase { .. } => "start_phase",
            Event::Tick { .. } => "tick",
            Event::ActivitySample(_) => "activity_sample",
            Event::SetListen { .. } => "set_listen",
            Event::PedalInput(_) => "pedal_input",
            Event::SliderInput(_) => "slider_input",
            Event::Annotation(_) => "annotation",
            Event::EndSession { .. } => "end_session",
        }
    }

    /// Pedal and slider inputs: the live feedback channel.
    pub fn is_feedback_input(&self) -> bool {
        matches!(self, Event::PedalInput(_) | Event::SliderInput(_))
    }

    /// Builds an event from a kind tag and its payload document.
    pub fn from_parts(kind: &str, payload: Value) -> Result<Event> {
        if !Self::KINDS.contains(&kind) {
            return Err(Error::UnknownKind(kind.to_string()));
        }
        let payload = match payload {
            Value::Null => Value::Object(Default::default()),
            other => other,
        };
        let doc = serde_json::json!({ "kind": kind, "payload": payload });
        serde_json::from_value(doc).map_err(|e| Error::malformed(format!("{kind}: {e}")))
    }

    pub fn payload(&self) -> Value {
        match serde_json::to_value(self) {
            Ok(Value::Object(mut map)) => map.remove("payload").unwrap_or(Value::Object(Default::default())),
            _ => unreachable!("events serialize to objects"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub seq: u64,
    pub tick: u64,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    seq: u64,
    tick: u64,
    kind: String,
    #[serde(default)]
    payload: Value,
}

impl EventRecord {
    pub fn new(seq: u64, tick: u64, event: Event) -> Self {
        EventRecord { seq, tick, event }
    }

    pub fn kind(&self) -> &'static str {
        self.event.kind()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::malformed(e.to_string()))?;
        Ok(EventRecord { seq: raw.seq, tick: raw.tick, event: Event::from_parts(&raw.kind, raw.payload)? })
    }
}

impl Serialize for EventRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawRecord { seq: self.seq, tick: self.tick, kind: self.event.kind().to_string(), payload: self.event.payload() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EventRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawRecord::deserialize(deserializer)?;
        let event = Event::from_parts(&raw.kind, raw.payload).map_err(D::Error::custom)?;
        Ok(EventRecord { seq: raw.seq, tick: raw.tick, event })
    }
}
