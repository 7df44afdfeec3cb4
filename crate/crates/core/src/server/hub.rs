//! Connection bookkeeping over many sessions.
//!
//! The hub is transport-agnostic: a transport feeds it parsed messages per
//! connection and forwards the returned deliveries. Each session applies its
//! events in one total order; sessions do not interact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde_json::json;

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::eventlog::LogWriter;
use crate::server::protocol::{ClientRole, JoinRequest, MessageType, Origin, ProtocolMessage};
use crate::server::route::{Outbound, StateView};
use crate::server::session::{Accepted, Session};
use crate::vc::OBSERVER_SOURCE_ID;

pub type ConnId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub conn: ConnId,
    pub message: ProtocolMessage,
}

#[derive(Debug, Default)]
struct Connection {
    session: Option<String>,
    roles: BTreeSet<ClientRole>,
}

#[derive(Debug, Default)]
pub struct Hub {
    sessions: BTreeMap<String, Session>,
    conns: BTreeMap<ConnId, Connection>,
    next_conn: ConnId,
    log_dir: Option<PathBuf>,
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Hub {
    pub fn new(log_dir: Option<PathBuf>) -> Self {
        Hub { log_dir, ..Hub::default() }
    }

    pub fn connect(&mut self) -> ConnId {
        self.next_conn += 1;
        self.conns.insert(self.next_conn, Connection::default());
        self.next_conn
    }

    pub fn disconnect(&mut self, conn: ConnId) {
        self.conns.remove(&conn);
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }

    pub fn roles(&self, conn: ConnId) -> Option<&BTreeSet<ClientRole>> {
        self.conns.get(&conn).map(|c| &c.roles)
    }

    /// Handles one inbound message from `conn`.
    pub fn handle(&mut self, conn: ConnId, msg: ProtocolMessage, ts: u64) -> Vec<Delivery> {
        match self.dispatch(conn, &msg, ts) {
            Ok(deliveries) => deliveries,
            Err(error) => {
                let reply = match self.sessions.get(&msg.session_id) {
                    Some(s) => s.error_reply(&error, msg.kind, ts),
                    None => ProtocolMessage {
                        kind: MessageType::Error,
                        session_id: msg.session_id.clone(),
                        seq: None,
                        ts,
                        payload: json!({
                            "code": error.code(),
                            "message": error.to_string(),
                            "rejected": msg.kind.as_str(),
                        }),
                    },
                };
                vec![Delivery { conn, message: reply }]
            }
        }
    }

    fn dispatch(&mut self, conn: ConnId, msg: &ProtocolMessage, ts: u64) -> Result<Vec<Delivery>> {
        let attached = self.conns.get(&conn).ok_or_else(|| Error::malformed("unknown connection"))?.session.clone();
        if let Some(current) = &attached {
            if *current != msg.session_id {
                return Err(Error::malformed(format!("connection is attached to session `{current}`")));
            }
        }
        match msg.kind {
            MessageType::Configure => self.configure(conn, msg, ts),
            MessageType::Join => self.join(conn, msg, ts),
            _ => {
                if attached.is_none() {
                    return Err(Error::malformed("join or configure first"));
                }
                let origin = Origin::Client(self.conns[&conn].roles.clone());
                let session = self
                    .sessions
                    .get_mut(&msg.session_id)
                    .ok_or_else(|| Error::malformed(format!("no session `{}`", msg.session_id)))?;
                let accepted = session.handle_message(&origin, msg, ts).map_err(|r| r.error)?;
                Ok(self.fan_out(&msg.session_id, vec![accepted]))
            }
        }
    }

    fn configure(&mut self, conn: ConnId, msg: &ProtocolMessage, ts: u64) -> Result<Vec<Delivery>> {
        let id = msg.session_id.clone();
        if !valid_session_id(&id) {
            return Err(Error::malformed("session ids use letters, digits, '-' and '_'"));
        }
        if self.sessions.contains_key(&id) {
            return Err(Error::malformed(format!("session `{id}` already exists")));
        }
        if self.conns[&conn].roles.iter().any(ClientRole::is_participant) {
            return Err(Error::malformed("a participant connection cannot monitor"));
        }
        let config: SessionConfig =
            serde_json::from_value(msg.payload.clone()).map_err(|e| Error::malformed(e.to_string()))?;
        let (log, sidecar) = match &self.log_dir {
            Some(dir) => (
                Some(LogWriter::open(dir.join(format!("{id}.jsonl")))?),
                Some(LogWriter::open(dir.join(format!("{id}.annotations.jsonl")))?),
            ),
            None => (None, None),
        };
        let (session, accepted) = Session::create(id.clone(), config, log, sidecar, ts)?;
        self.sessions.insert(id.clone(), session);
        let c = self.conns.get_mut(&conn).expect("checked above");
        c.session = Some(id.clone());
        c.roles.insert(ClientRole::Monitor);
        Ok(self.fan_out(&id, vec![accepted]))
    }

    fn join(&mut self, conn: ConnId, msg: &ProtocolMessage, ts: u64) -> Result<Vec<Delivery>> {
        let id = msg.session_id.clone();
        let req: JoinRequest =
            serde_json::from_value(msg.payload.clone()).map_err(|e| Error::malformed(e.to_string()))?;
        let role = req.resolved_role()?;
        let session = self.sessions.get_mut(&id).ok_or_else(|| Error::malformed(format!("no session `{id}`")))?;
        let roles = &self.conns[&conn].roles;
        let colocated = match &role {
            ClientRole::Monitor => roles.iter().any(ClientRole::is_participant),
            ClientRole::Participant(_) => roles.contains(&ClientRole::Monitor),
            _ => false,
        };
        if colocated {
            return Err(Error::malformed("monitor and participant roles cannot share a connection"));
        }

        let mut accepted = Vec::new();
        match &role {
            ClientRole::Participant(seat) => {
                let seat_held =
                    self.conns.values().any(|c| c.session.as_deref() == Some(id.as_str()) && c.roles.contains(&role));
                let known = session.state().profiles.contains_key(seat);
                if !known || seat_held {
                    // New seat, or a second claim that the session will refuse.
                    let origin = Origin::Client(roles.clone());
                    accepted.push(session.handle_message(&origin, msg, ts).map_err(|r| r.error)?);
                }
            }
            ClientRole::Observer(source_id) => {
                if let Some(vc) = session.state().vc() {
                    if vc.sources.get(source_id).is_none() {
                        return Err(Error::UnauthorizedSource {
                            source_id: source_id.clone(),
                            target: crate::seat::SeatId(0),
                        });
                    }
                } else if source_id != OBSERVER_SOURCE_ID {
                    return Err(Error::malformed(format!("unknown observer `{source_id}`")));
                }
            }
            ClientRole::Coder | ClientRole::Monitor => {}
        }

        let c = self.conns.get_mut(&conn).expect("connection exists");
        c.session = Some(id.clone());
        c.roles.insert(role);

        let state = self.sessions[&id].state();
        let welcome = StateView::Session {
            mode: state.config.mode,
            n_seats: state.config.n_seats,
            phase: state.phase,
            tick: state.tick,
        };
        let mut out = vec![Delivery {
            conn,
            message: ProtocolMessage {
                kind: MessageType::StateUpdate,
                session_id: id.clone(),
                seq: Some(state.last_seq),
                ts,
                payload: serde_json::to_value(welcome).expect("views serialize"),
            },
        }];
        out.extend(self.fan_out(&id, accepted));
        Ok(out)
    }

    /// Advances one session's clock by a tick.
    pub fn clock_tick(&mut self, session_id: &str, ts: u64) -> Result<Vec<Delivery>> {
        let session =
            self.sessions.get_mut(session_id).ok_or_else(|| Error::malformed(format!("no session `{session_id}`")))?;
        let accepted = session.clock_tick(ts)?;
        Ok(self.fan_out(session_id, accepted))
    }

    fn fan_out(&self, session_id: &str, accepted: Vec<Accepted>) -> Vec<Delivery> {
        let members: Vec<(ConnId, &Connection)> = self
            .conns
            .iter()
            .filter(|(_, c)| c.session.as_deref() == Some(session_id))
            .map(|(id, c)| (*id, c))
            .collect();
        let mut out = Vec::new();
        for Outbound { to, message } in accepted.into_iter().flat_map(|a| a.outbound) {
            for (conn, c) in &members {
                if c.roles.contains(&to) {
                    out.push(Delivery { conn: *conn, message: message.clone() });
                }
            }
        }
        out
    }
}
