use serde_json::json;

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::event::{Event, EventRecord, JoinPayload};
use crate::eventlog::LogWriter;
use crate::server::protocol::{ClientRole, JoinRequest, MessageType, Origin, ProtocolMessage};
use crate::server::route::{route_outbound, Outbound};
use crate::session::SessionState;
use crate::vc::evaluator_source_id;

/// An event the session accepted, with the messages it fans out.
#[derive(Debug, Clone, PartialEq)]
pub struct Accepted {
    pub record: EventRecord,
    pub outbound: Vec<Outbound>,
}

/// A refused message: no event was recorded. `reply` goes to the sender only.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub error: Error,
    pub reply: ProtocolMessage,
}

/// One live session: a single writer applying events in one total order.
#[derive(Debug)]
pub struct Session {
    id: String,
    state: SessionState,
    records: Vec<EventRecord>,
    log: Option<LogWriter>,
    annotations: Option<LogWriter>,
}

impl Session {
    /// Starts a session; its first record is the `configure` event.
    pub fn create(
        id: impl Into<String>,
        config: SessionConfig,
        log: Option<LogWriter>,
        annotations: Option<LogWriter>,
        ts: u64,
    ) -> Result<(Session, Accepted)> {
        let state = SessionState::new(config.clone())?;
        let mut session = Session { id: id.into(), state, records: Vec::new(), log, annotations };
        let accepted = session.commit(Event::Configure(config), ts)?;
        Ok((session, accepted))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    /// Authorizes, applies, persists and routes one event.
    pub fn submit(&mut self, origin: &Origin, event: Event, ts: u64) -> Result<Accepted> {
        authorize(origin, &event)?;
        self.commit(event, ts)
    }

    fn commit(&mut self, event: Event, ts: u64) -> Result<Accepted> {
        let record = EventRecord::new(self.state.last_seq + 1, self.state.tick, event);
        let next = self.state.apply_event(&record)?;
        if let Some(log) = &mut self.log {
            log.append(&record)?;
        }
        if let (Some(sidecar), Event::Annotation(a)) = (&mut self.annotations, &record.event) {
            if let Some(coded) = &a.coded {
                sidecar.append_coded(coded)?;
            }
        }
        self.state = next;
        self.records.push(record.clone());
        let outbound = route_outbound(&self.state, &record, &self.id, ts);
        Ok(Accepted { record, outbound })
    }

    /// Turns a client message into the next event, or refuses it.
    pub fn handle_message(
        &mut self,
        origin: &Origin,
        msg: &ProtocolMessage,
        ts: u64,
    ) -> std::result::Result<Accepted, Rejection> {
        self.event_for(origin, msg)
            .and_then(|event| self.submit(origin, event, ts))
            .map_err(|error| Rejection { reply: self.error_reply(&error, msg.kind, ts), error })
    }

    fn event_for(&self, origin: &Origin, msg: &ProtocolMessage) -> Result<Event> {
        if msg.session_id != self.id {
            return Err(Error::malformed(format!("message for session `{}`", msg.session_id)));
        }
        match msg.kind {
            kind if kind.is_outbound_only() => Err(Error::malformed(format!("{kind} is sent by the server only"))),
            MessageType::Configure => Err(Error::malformed(format!("session `{}` already configured", self.id))),
            MessageType::Join => {
                let req: JoinRequest =
                    serde_json::from_value(msg.payload.clone()).map_err(|e| Error::malformed(e.to_string()))?;
                match req.resolved_role()? {
                    ClientRole::Participant(seat) => {
                        if origin.has(&ClientRole::Monitor) && !origin.is_server() {
                            return Err(Error::malformed("a monitor connection cannot take a participant seat"));
                        }
                        Ok(Event::Join(JoinPayload {
                            seat,
                            display_name: req.display_name,
                            role_expected_share: req.role_expected_share,
                        }))
                    }
                    _ => Err(Error::malformed("only participant joins are session events")),
                }
            }
            kind => Event::from_parts(kind.as_str(), msg.payload.clone()),
        }
    }

    /// Closes the open tick, then applies any transitions the plan calls for.
    pub fn clock_tick(&mut self, ts: u64) -> Result<Vec<Accepted>> {
        if self.state.phase.is_closed() {
            return Ok(Vec::new());
        }
        let heard = self.state.heard_now();
        let mut out = vec![self.commit(Event::Tick { heard }, ts)?];
        out.extend(self.run_schedule(ts)?);
        Ok(out)
    }

    /// Applies scheduled phase transitions due at the current tick.
    pub fn run_schedule(&mut self, ts: u64) -> Result<Vec<Accepted>> {
        let mut out = Vec::new();
        while let Some(event) = self.state.scheduled_transition() {
            out.push(self.commit(event, ts)?);
        }
        Ok(out)
    }

    pub fn error_reply(&self, error: &Error, rejected: MessageType, ts: u64) -> ProtocolMessage {
        ProtocolMessage {
            kind: MessageType::Error,
            session_id: self.id.clone(),
            seq: Some(self.state.last_seq),
            ts,
            payload: json!({
                "code": error.code(),
                "message": error.to_string(),
                "rejected": rejected.as_str(),
            }),
        }
    }
}

fn denied(who: String, event: &Event) -> Error {
    let target = match event {
        Event::PedalInput(p) => p.seat,
        Event::SliderInput(s) => s.target,
        Event::SetListen { seat, .. } => *seat,
        Event::ActivitySample(s) => s.seat,
        _ => crate::seat::SeatId(0),
    };
    Error::UnauthorizedSource { source_id: who, target }
}

/// Which roles may submit which events. The server may submit anything.
fn authorize(origin: &Origin, event: &Event) -> Result<()> {
    if origin.is_server() {
        return Ok(());
    }
    let ok = match event {
        Event::Configure(_) | Event::Tick { .. } => false,
        Event::Join(_) => !origin.has(&ClientRole::Monitor),
        Event::ActivitySample(s) => origin.has(&ClientRole::Participant(s.seat)) || origin.has(&ClientRole::Monitor),
        Event::SetListen { seat, .. } => origin.has(&ClientRole::Participant(*seat)),
        Event::PedalInput(p) => origin.has(&ClientRole::Participant(p.seat)),
        Event::SliderInput(s) => {
            origin.has(&ClientRole::Observer(s.source_id.clone()))
                || origin.has_any(
                    |r| matches!(r, ClientRole::Participant(seat) if evaluator_source_id(*seat) == s.source_id),
                )
        }
        Event::StartPhase { .. } | Event::EndSession { .. } => {
            origin.has(&ClientRole::Monitor) || origin.has_any(|r| matches!(r, ClientRole::Observer(_)))
        }
        Event::Annotation(_) => {
            origin.has(&ClientRole::Coder)
                || origin.has(&ClientRole::Monitor)
                || origin.has_any(|r| matches!(r, ClientRole::Observer(_)))
        }
    };
    if ok {
        return Ok(());
    }
    let who = match (event, origin) {
        (Event::SliderInput(s), _) => s.source_id.clone(),
        (_, Origin::Client(roles)) => {
            roles.iter().map(|r| serde_json::to_string(r).unwrap_or_default()).collect::<Vec<_>>().join(",")
        }
        (_, Origin::Server) => "server".to_string(),
    };
    Err(denied(who, event))
}
