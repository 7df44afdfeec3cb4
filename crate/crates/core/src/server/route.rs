//! Role-targeted fan-out of committed state.
//!
//! Participants only ever receive their own slice of analysis-sensitive
//! state: a speaker view without listener data, their own feedback dot in
//! private mode. Monitors get the analysis views.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::Value;

use crate::config::{DotVisibility, Mode};
use crate::event::{AnnotationPayload, Event, EventRecord};
use crate::phase::SessionPhase;
use crate::routing::{self, HeardEdge, SpeakerView};
use crate::seat::SeatId;
use crate::server::protocol::{ClientRole, MessageType, ProtocolMessage};
use crate::session::{EngineState, SessionState};
use crate::vc::{self, SourceKind, OBSERVER_SOURCE_ID};

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: ClientRole,
    pub message: ProtocolMessage,
}

/// `state_update` payloads, tagged by `view`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "view", rename_all = "snake_case")]
pub enum StateView {
    Session {
        mode: Mode,
        n_seats: u32,
        phase: SessionPhase,
        tick: u64,
    },
    Phase {
        phase: SessionPhase,
        tick: u64,
    },
    Roster {
        seat: SeatId,
        display_name: String,
    },
    Territory {
        tick: u64,
        cells: Vec<u32>,
    },
    Speaker(SpeakerView),
    /// Monitor only.
    Routing {
        listen: Vec<SeatId>,
        listener_counts: Vec<usize>,
        mutual_pairs: Vec<(SeatId, SeatId)>,
    },
    /// Monitor only.
    Heard {
        tick: u64,
        edges: Vec<HeardEdge>,
    },
    Ball {
        seat: SeatId,
        size: f64,
        brightness: f64,
    },
    Balls {
        size: Vec<f64>,
        brightness: Vec<f64>,
    },
    Annotation(AnnotationPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DotUpdate {
    pub target: SeatId,
    pub hue: f64,
    pub size: f64,
    pub intensity: f64,
    pub seq: u64,
    /// Target's speaking share minus its expected share; sources only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<f64>,
}

struct Fanout<'a> {
    state: &'a SessionState,
    session_id: &'a str,
    seq: u64,
    ts: u64,
    out: Vec<Outbound>,
}

impl Fanout<'_> {
    fn send(&mut self, to: ClientRole, kind: MessageType, payload: Value) {
        self.out.push(Outbound {
            to,
            message: ProtocolMessage {
                kind,
                session_id: self.session_id.to_string(),
                seq: Some(self.seq),
                ts: self.ts,
                payload,
            },
        });
    }

    fn view(&mut self, to: ClientRole, view: &StateView) {
        let payload = serde_json::to_value(view).expect("views serialize");
        self.send(to, MessageType::StateUpdate, payload);
    }

    fn participants(&self) -> Vec<ClientRole> {
        self.state.config.seats().map(ClientRole::Participant).collect()
    }

    fn observers(&self) -> BTreeSet<ClientRole> {
        match self.state.vc() {
            Some(v) => v.sources.iter().map(|s| ClientRole::Observer(s.source_id.clone())).collect(),
            None => BTreeSet::from([ClientRole::Observer(OBSERVER_SOURCE_ID.to_string())]),
        }
    }

    fn broadcast_seated(&mut self, view: &StateView) {
        for p in self.participants() {
            self.view(p, view);
        }
        self.view(ClientRole::Monitor, view);
    }

    fn broadcast_all(&mut self, view: &StateView) {
        self.broadcast_seated(view);
        for o in self.observers() {
            self.view(o, view);
        }
        self.view(ClientRole::Coder, view);
    }

    fn territory(&mut self) {
        if let (Some(t), true) = (self.state.territory(), self.state.feedback_visible()) {
            let view = StateView::Territory { tick: self.state.tick, cells: t.cells.clone() };
            self.broadcast_seated(&view);
        }
    }

    fn speaker_view(&mut self, seat: SeatId) {
        if let Some(r) = self.state.routing() {
            if let Ok(view) = routing::speaker_view(r, seat) {
                self.view(ClientRole::Participant(seat), &StateView::Speaker(view));
            }
        }
    }

    fn routing_analysis(&mut self) {
        if let Some(r) = self.state.routing() {
            let counts =
                self.state.config.seats().map(|s| routing::listeners_of(r, s).map_or(0, |l| l.len())).collect();
            let view = StateView::Routing {
                listen: r.listen.clone(),
                listener_counts: counts,
                mutual_pairs: routing::mutual_pairs(r).into_iter().collect(),
            };
            self.view(ClientRole::Monitor, &view);
        }
    }

    fn all_balls(&mut self) {
        if let (Some(t), true) = (self.state.tic(), self.state.feedback_visible()) {
            let view = StateView::Balls { size: t.balls.size.clone(), brightness: t.balls.brightness.clone() };
            self.broadcast_seated(&view);
        }
    }

    fn dot(&mut self, target: SeatId, controller: Option<&str>) {
        let state = self.state;
        let seq = self.seq;
        let Some(v) = state.vc() else { return };
        let Some(dot) = v.dot(target) else { return };
        let update = |context: Option<f64>| DotUpdate {
            target,
            hue: dot.hue,
            size: dot.size,
            intensity: dot.intensity,
            seq,
            context,
        };
        let plain = serde_json::to_value(update(None)).expect("dots serialize");

        match state.config.dot_visibility {
            DotVisibility::Private => {
                self.send(ClientRole::Participant(target), MessageType::DotUpdate, plain.clone());
            }
            DotVisibility::Public => {
                for p in self.participants() {
                    self.send(p, MessageType::DotUpdate, plain.clone());
                }
            }
        }
        self.send(ClientRole::Monitor, MessageType::DotUpdate, plain);

        let sources: Vec<(String, SourceKind)> = match controller {
            Some(id) => v.sources.get(id).map(|s| (s.source_id.clone(), s.kind)).into_iter().collect(),
            None => v.sources.controllers_of(target).map(|s| (s.source_id.clone(), s.kind)).collect(),
        };
        for (source_id, kind) in sources {
            let show = kind == SourceKind::ExternalObserver || state.config.show_context_to_evaluator;
            let context = show.then(|| self.context_for(target));
            let payload = serde_json::to_value(update(context)).expect("dots serialize");
            self.send(ClientRole::Observer(source_id), MessageType::DotUpdate, payload);
        }
    }

    fn context_for(&self, seat: SeatId) -> f64 {
        let counts = &self.state.activity.speaking_ticks;
        let total: u64 = counts.iter().sum();
        let share = if total == 0 { 0.0 } else { counts[seat.index()] as f64 / total as f64 };
        share - vc::expected_share(&self.state.profiles, seat, self.state.config.n_seats)
    }

    fn phase_entry(&mut self) {
        let view = StateView::Phase { phase: self.state.phase, tick: self.state.tick };
        self.broadcast_all(&view);
        if self.state.phase != SessionPhase::Intervention {
            return;
        }
        let state = self.state;
        match &state.engine {
            EngineState::Territory(_) => self.territory(),
            EngineState::Routing(_) => {
                for seat in state.config.seats() {
                    self.speaker_view(seat);
                }
                self.routing_analysis();
            }
            EngineState::Tic(_) => self.all_balls(),
            EngineState::Vc(v) => {
                for seat in v.recipients.iter().copied() {
                    self.dot(seat, None);
                }
            }
        }
    }

    fn joined(&mut self, seat: SeatId) {
        let state = self.state;
        if let Some(profile) = state.profiles.get(&seat) {
            let view = StateView::Roster { seat, display_name: profile.display_name.clone() };
            self.broadcast_seated(&view);
        }
        match &state.engine {
            EngineState::Routing(_) => self.speaker_view(seat),
            EngineState::Tic(t) if state.feedback_visible() => {
                let view = StateView::Balls { size: t.balls.size.clone(), brightness: t.balls.brightness.clone() };
                self.view(ClientRole::Participant(seat), &view);
            }
            EngineState::Territory(t) if state.feedback_visible() => {
                let view = StateView::Territory { tick: state.tick, cells: t.cells.clone() };
                self.view(ClientRole::Participant(seat), &view);
            }
            EngineState::Vc(v) if state.feedback_visible() => {
                if let Some(dot) = v.dot(seat) {
                    let update = DotUpdate {
                        target: seat,
                        hue: dot.hue,
                        size: dot.size,
                        intensity: dot.intensity,
                        seq: self.seq,
                        context: None,
                    };
                    let payload = serde_json::to_value(update).expect("dots serialize");
                    self.send(ClientRole::Participant(seat), MessageType::DotUpdate, payload);
                }
            }
            _ => {}
        }
    }
}

/// Messages produced by `record`, already applied to give `state`.
pub fn route_outbound(state: &SessionState, record: &EventRecord, session_id: &str, ts: u64) -> Vec<Outbound> {
    let mut f = Fanout { state, session_id, seq: record.seq, ts, out: Vec::new() };
    match &record.event {
        Event::Configure(cfg) => {
            let view =
                StateView::Session { mode: cfg.mode, n_seats: cfg.n_seats, phase: state.phase, tick: state.tick };
            f.view(ClientRole::Monitor, &view);
        }
        Event::Join(join) => f.joined(join.seat),
        Event::StartPhase { .. } | Event::EndSession { .. } => f.phase_entry(),
        Event::Tick { heard } => {
            f.territory();
            if let Some(edges) = heard {
                let view = StateView::Heard { tick: record.tick, edges: edges.clone() };
                f.view(ClientRole::Monitor, &view);
            }
        }
        Event::ActivitySample(_) => f.territory(),
        Event::SetListen { seat, .. } => {
            f.speaker_view(*seat);
            f.routing_analysis();
        }
        Event::PedalInput(p) => {
            if let Some(t) = state.tic() {
                if let Some(target) = t.cycle.target_of(p.seat) {
                    let view = StateView::Ball {
                        seat: target,
                        size: t.balls.size[target.index()],
                        brightness: t.balls.brightness[target.index()],
                    };
                    f.broadcast_seated(&view);
                }
            }
        }
        Event::SliderInput(s) => f.dot(s.target, Some(&s.source_id)),
        Event::Annotation(a) => {
            let view = StateView::Annotation(a.clone());
            f.view(ClientRole::Coder, &view);
            f.view(ClientRole::Monitor, &view);
        }
    }
    f.out
}

/// JSON keys a participant must never receive.
pub const ANALYSIS_ONLY_KEYS: [&str; 5] = ["listen", "listener_counts", "listeners", "mutual_pairs", "edges"];

/// Every object key anywhere inside `value`.
pub fn collect_keys(value: &Value, out: &mut BTreeSet<String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                out.insert(k.clone());
                collect_keys(v, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_keys(v, out)),
        _ => {}
    }
}
