//! The event-sourced session aggregate.
//!
//! [`SessionState`] is a pure fold of [`EventRecord`]s over the initial state
//! built from a [`SessionConfig`]. Applying an event either yields the next
//! state or an error and leaves the current state untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{validate_config, Mode, SessionConfig};
use crate::error::{Error, Result};
use crate::event::{ActivitySample, AnnotationPayload, Event, EventRecord, JoinPayload};
use crate::phase::SessionPhase;
use crate::reflect::{self, TerritoryState};
use crate::routing::{self, RoutingState};
use crate::seat::SeatId;
use crate::tic::{self, BallState, TicState};
use crate::vc::{self, VcState};

/// Slack allowed on the sum of declared role shares.
pub const ROLE_SHARE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub seat: SeatId,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_expected_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum EngineState {
    Territory(TerritoryState),
    Routing(RoutingState),
    Tic(TicState),
    Vc(VcState),
}

impl EngineState {
    fn new(config: &SessionConfig) -> Result<Self> {
        Ok(match config.mode {
            Mode::Reflect => EngineState::Territory(TerritoryState::new(config.n_seats)),
            Mode::Simulation => EngineState::Routing(RoutingState::identity(config.n_seats)),
            Mode::Tic => EngineState::Tic(TicState {
                cycle: tic::generate_assignment(config.n_seats, config.rng_seed)?,
                balls: BallState::neutral(config.n_seats, config.brightness_floor),
            }),
            Mode::VcFeedback => EngineState::Vc(VcState::new(config)?),
        })
    }
}

/// Speaking levels gathered for the open tick, plus running totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityLedger {
    pub pending: Vec<Option<f64>>,
    pub speaking_ticks: Vec<u64>,
}

impl ActivityLedger {
    fn new(n_seats: u32) -> Self {
        ActivityLedger { pending: vec![None; n_seats as usize], speaking_ticks: vec![0; n_seats as usize] }
    }

    /// Seats above `threshold` in the open tick.
    pub fn speaking_now(&self, threshold: f64) -> Vec<bool> {
        self.pending.iter().map(|l| l.is_some_and(|l| l > threshold)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config: SessionConfig,
    pub phase: SessionPhase,
    pub phase_started_tick: u64,
    /// The open tick; closed by the next `tick` event.
    pub tick: u64,
    pub last_seq: u64,
    pub profiles: BTreeMap<SeatId, ParticipantProfile>,
    pub activity: ActivityLedger,
    pub engine: EngineState,
    pub annotations: u64,
}

impl SessionState {
    pub fn new(config: SessionConfig) -> Result<Self> {
        validate_config(&config).map_err(Error::InvalidConfig)?;
        let engine = EngineState::new(&config)?;
        Ok(SessionState {
            phase: SessionPhase::Lobby,
            phase_started_tick: 0,
            tick: 0,
            last_seq: 0,
            profiles: BTreeMap::new(),
            activity: ActivityLedger::new(config.n_seats),
            engine,
            annotations: 0,
            config,
        })
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// Whether pedal/slider input currently drives visible feedback.
    pub fn feedback_live(&self) -> bool {
        self.phase == SessionPhase::Intervention
    }

    /// Whether feedback displays should be shown to participants.
    pub fn feedback_visible(&self) -> bool {
        self.feedback_live()
            || (self.config.show_idle_feedback
                && matches!(self.phase, SessionPhase::PreIntervention | SessionPhase::Intervention))
    }

    pub fn territory(&self) -> Option<&TerritoryState> {
        match &self.engine {
            EngineState::Territory(t) => Some(t),
            _ => None,
        }
    }

    pub fn routing(&self) -> Option<&RoutingState> {
        match &self.engine {
            EngineState::Routing(r) => Some(r),
            _ => None,
        }
    }

    pub fn tic(&self) -> Option<&TicState> {
        match &self.engine {
            EngineState::Tic(t) => Some(t),
            _ => None,
        }
    }

    pub fn vc(&self) -> Option<&VcState> {
        match &self.engine {
            EngineState::Vc(v) => Some(v),
            _ => None,
        }
    }

    /// Canonical serialization; equal states give equal bytes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state always serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_canonical_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_seat(&self, seat: SeatId) -> Result<()> {
        if self.config.has_seat(seat) {
            Ok(())
        } else {
            Err(Error::UnknownSeat(seat))
        }
    }

    /// Moves one step along the phase chain and readies the engine for it.
    pub fn advance_phase(&self) -> Result<SessionState> {
        let next_phase = self.phase.next().ok_or(Error::AlreadyClosed)?;
        let mut next = self.clone();
        next.phase = next_phase;
        next.phase_started_tick = self.tick;
        match (&mut next.engine, next_phase) {
            (EngineState::Routing(r), SessionPhase::Intervention) => r.set_powered(true),
            (EngineState::Routing(r), SessionPhase::Debrief) => r.set_powered(false),
            (EngineState::Tic(t), SessionPhase::Intervention) => {
                t.balls = BallState::neutral(self.config.n_seats, self.config.brightness_floor);
            }
            (EngineState::Vc(v), SessionPhase::Intervention) => {
                for dot in v.dots.values_mut() {
                    *dot = vc::FeedbackDot::default();
                }
            }
            _ => {}
        }
        Ok(next)
    }

    /// The event the phase plan calls for at the current tick, if any.
    /// Lobby is left only by an explicit `start_phase`.
    pub fn scheduled_transition(&self) -> Option<Event> {
        if matches!(self.phase, SessionPhase::Lobby | SessionPhase::Closed) {
            return None;
        }
        let elapsed = self.tick - self.phase_started_tick;
        if elapsed < self.config.duration_of(self.phase) {
            return None;
        }
        Some(match self.phase.next()? {
            SessionPhase::Closed => Event::EndSession { reason: None },
            phase => Event::StartPhase { phase },
        })
    }

    /// Checks and applies one record, returning the successor state.
    pub fn apply_event(&self, record: &EventRecord) -> Result<SessionState> {
        let expected = self.last_seq + 1;
        if record.seq != expected {
            return Err(Error::SequenceGap { expected, got: record.seq });
        }
        if record.tick != self.tick {
            return Err(Error::malformed(format!(
                "record tick {} does not match session tick {}",
                record.tick, self.tick
            )));
        }

        let kind = record.kind();
        let mut next = match (&record.event, self.last_seq) {
            (Event::Configure(cfg), 0) if *cfg == self.config => self.clone(),
            (_, 0) => return Err(Error::ConfigMismatch),
            (Event::Configure(_), _) => return Err(Error::malformed("session already configured")),
            (Event::Annotation(a), _) => self.with_annotation(a)?,
            (_, _) if self.phase.is_closed() => return Err(Error::AlreadyClosed),
            (Event::Join(join), _) => self.with_join(join)?,
            (Event::StartPhase { phase }, _) => {
                if Some(*phase) != self.phase.next() || *phase == SessionPhase::Closed {
                    return Err(Error::phase(kind, self.phase));
                }
                self.advance_phase()?
            }
            (Event::EndSession { .. }, _) => {
                if self.phase != SessionPhase::Debrief {
                    return Err(Error::phase(kind, self.phase));
                }
                self.advance_phase()?
            }
            (Event::Tick { .. }, _) => self.with_tick_closed(),
            (Event::ActivitySample(sample), _) => self.with_sample(sample)?,
            (Event::SetListen { seat, channel }, _) => {
                let EngineState::Routing(r) = &self.engine else {
                    return Err(self.wrong_mode(kind));
                };
                let routed = routing::set_listen(r, *seat, *channel)?;
                let mut next = self.clone();
                next.engine = EngineState::Routing(routed);
                next
            }
            (Event::PedalInput(input), _) => {
                let EngineState::Tic(t) = &self.engine else {
                    return Err(self.wrong_mode(kind));
                };
                if !self.feedback_live() {
                    return Err(Error::phase(kind, self.phase));
                }
                let balls = tic::apply_pedal(&t.balls, &t.cycle, *input)?;
                let mut next = self.clone();
                next.engine = EngineState::Tic(TicState { cycle: t.cycle.clone(), balls });
                next
            }
            (Event::SliderInput(input), _) => {
                let EngineState::Vc(v) = &self.engine else {
                    return Err(self.wrong_mode(kind));
                };
                if !self.feedback_live() {
                    return Err(Error::phase(kind, self.phase));
                }
                let updated = vc::apply_slider(v, self.config.n_seats, input)?;
                let mut next = self.clone();
                next.engine = EngineState::Vc(updated);
                next
            }
        };
        next.last_seq = record.seq;
        Ok(next)
    }

    /// In-place variant of [`apply_event`](Self::apply_event); untouched on error.
    pub fn apply(&mut self, record: &EventRecord) -> Result<()> {
        *self = self.apply_event(record)?;
        Ok(())
    }

    fn wrong_mode(&self, kind: &str) -> Error {
        Error::malformed(format!("{kind} is not accepted in {:?} mode", self.config.mode))
    }

    fn with_join(&self, join: &JoinPayload) -> Result<SessionState> {
        self.check_seat(join.seat)?;
        if self.profiles.contains_key(&join.seat) {
            return Err(Error::malformed(format!("seat {} already joined", join.seat)));
        }
        if let Some(share) = join.role_expected_share {
            if !(0.0..=1.0).contains(&share) {
                return Err(Error::malformed("role_expected_share outside [0, 1]"));
            }
            let declared: f64 = self.profiles.values().filter_map(|p| p.role_expected_share).sum::<f64>() + share;
            if declared > 1.0 + ROLE_SHARE_TOLERANCE {
                return Err(Error::malformed("declared role shares exceed 1"));
            }
        }
        let mut next = self.clone();
        next.profiles.insert(
            join.seat,
            ParticipantProfile {
                seat: join.seat,
                display_name: join.display_name.clone(),
                role_expected_share: join.role_expected_share,
            },
        );
        Ok(next)
    }

    fn with_sample(&self, sample: &ActivitySample) -> Result<SessionState> {
        self.check_seat(sample.seat)?;
        if sample.tick != self.tick {
            return Err(Error::malformed(format!("sample for tick {} while tick {} is open", sample.tick, self.tick)));
        }
        if !(0.0..=1.0).contains(&sample.level) {
            return Err(Error::malformed("activity level outside [0, 1]"));
        }
        let i = sample.seat.index();
        if self.activity.pending[i].is_some() {
            return Err(Error::malformed(format!("duplicate sample for seat {} at tick {}", sample.seat, sample.tick)));
        }
        let mut next = self.clone();
        next.activity.pending[i] = Some(sample.level);
        if let EngineState::Territory(t) = &mut next.engine {
            let params = &self.config.reflect;
            t.smoothed[i] = reflect::smooth_level(t.smoothed[i], sample.level, params.alpha());
            t.cells = reflect::allocate_territory(&t.smoothed, params);
        }
        Ok(next)
    }

    fn with_tick_closed(&self) -> SessionState {
        let mut next = self.clone();
        let threshold = self.config.speaking_threshold;
        for (count, level) in next.activity.speaking_ticks.iter_mut().zip(&self.activity.pending) {
            if level.is_some_and(|l| l > threshold) {
                *count += 1;
            }
        }
        if let EngineState::Territory(t) = &mut next.engine {
            let params = &self.config.reflect;
            let alpha = params.alpha();
            for (s, level) in t.smoothed.iter_mut().zip(&self.activity.pending) {
                if level.is_none() {
                    *s = reflect::smooth_level(*s, 0.0, alpha);
                }
            }
            t.cells = reflect::allocate_territory(&t.smoothed, params);
        }
        next.activity.pending.iter_mut().for_each(|l| *l = None);
        next.tick += 1;
        next
    }

    fn with_annotation(&self, annotation: &AnnotationPayload) -> Result<SessionState> {
        if let Some(coded) = &annotation.coded {
            coded.validate()?;
            self.check_seat(coded.seat)?;
        }
        let mut next = self.clone();
        next.annotations += 1;
        Ok(next)
    }

    /// Heard edges for the open tick, for routing sessions.
    pub fn heard_now(&self) -> Option<Vec<routing::HeardEdge>> {
        let r = self.routing()?;
        Some(routing::heard_edges(r, &self.activity.speaking_now(self.config.speaking_threshold)))
    }
}
