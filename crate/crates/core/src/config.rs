//! Session configuration and its validation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::SessionPhase;
use crate::reflect::ReflectParams;
use crate::seat::SeatId;
use crate::tic::{self, DEFAULT_BRIGHTNESS_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Reflect,
    Simulation,
    Tic,
    VcFeedback,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Reflect, Mode::Simulation, Mode::Tic, Mode::VcFeedback];

    pub fn default_seats(self) -> u32 {
        match self {
            Mode::Simulation => 12,
            _ => 8,
        }
    }

    /// Modes whose plan must open with a feedback-free baseline.
    pub fn needs_baseline(self) -> bool {
        matches!(self, Mode::Tic | Mode::VcFeedback)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "reflect" => Ok(Mode::Reflect),
            "simulation" => Ok(Mode::Simulation),
            "tic" => Ok(Mode::Tic),
            "vcfeedback" | "vc" => Ok(Mode::VcFeedback),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Who drives the feedback dots in `VcFeedback` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeedbackSourcePolicy {
    #[default]
    ExternalObserver,
    ParticipantCycle,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DotVisibility {
    #[default]
    Private,
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpan {
    pub phase: SessionPhase,
    pub duration_ticks: u64,
}

fn default_tick_hz() -> u32 {
    10
}

fn default_threshold() -> f64 {
    0.5
}

fn default_floor() -> f64 {
    DEFAULT_BRIGHTNESS_FLOOR
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: Mode,
    pub n_seats: u32,
    #[serde(default = "default_tick_hz")]
    pub tick_hz: u32,
    pub phase_plan: Vec<PhaseSpan>,
    #[serde(default)]
    pub feedback_source: FeedbackSourcePolicy,
    /// Seats given feedback; empty means every seat.
    #[serde(default)]
    pub recipients: BTreeSet<SeatId>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub show_idle_feedback: bool,
    #[serde(default)]
    pub dot_visibility: DotVisibility,
    #[serde(default = "default_true")]
    pub show_context_to_evaluator: bool,
    #[serde(default = "default_threshold")]
    pub speaking_threshold: f64,
    #[serde(default = "default_floor")]
    pub brightness_floor: f64,
    #[serde(default)]
    pub reflect: ReflectParams,
}

impl SessionConfig {
    /// A mode's default table with a baseline → intervention → debrief plan.
    pub fn for_mode(mode: Mode) -> Self {
        SessionConfig {
            mode,
            n_seats: mode.default_seats(),
            tick_hz: default_tick_hz(),
            phase_plan: vec![
                PhaseSpan { phase: SessionPhase::PreIntervention, duration_ticks: 3000 },
                PhaseSpan { phase: SessionPhase::Intervention, duration_ticks: 3000 },
                PhaseSpan { phase: SessionPhase::Debrief, duration_ticks: 600 },
            ],
            feedback_source: FeedbackSourcePolicy::default(),
            recipients: BTreeSet::new(),
            rng_seed: 0,
            show_idle_feedback: false,
            dot_visibility: DotVisibility::default(),
            show_context_to_evaluator: true,
            speaking_threshold: default_threshold(),
            brightness_floor: default_floor(),
            reflect: ReflectParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::malformed(e.to_string()))
    }

    pub fn seats(&self) -> impl Iterator<Item = SeatId> {
        (0..self.n_seats).map(SeatId)
    }

    pub fn has_seat(&self, seat: SeatId) -> bool {
        seat.0 < self.n_seats
    }

    /// Recipients with the empty-set shorthand expanded.
    pub fn effective_recipients(&self) -> BTreeSet<SeatId> {
        if self.recipients.is_empty() {
            self.seats().collect()
        } else {
            self.recipients.clone()
        }
    }

    /// Configured duration of `phase`; phases missing from the plan last zero ticks.
    pub fn duration_of(&self, phase: SessionPhase) -> u64 {
        self.phase_plan.iter().find(|p| p.phase == phase).map_or(0, |p| p.duration_ticks)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    TooFewSeats { n_seats: u32 },
    NoValidAssignment { n_seats: u32 },
    EmptyPhasePlan,
    PhasePlanOrder { phase: SessionPhase },
    MissingBaseline,
    RecipientOutOfRange { seat: u32 },
    ZeroTickRate,
    BadParameter { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewSeats { n_seats } => write!(f, "{n_seats} seats; at least 2 required"),
            Violation::NoValidAssignment { n_seats } => {
                write!(f, "no valid assignment exists for {n_seats} seats")
            }
            Violation::EmptyPhasePlan => write!(f, "phase plan is empty"),
            Violation::PhasePlanOrder { phase } => {
                write!(f, "phase plan entry {phase} is out of order or not plannable")
            }
            Violation::MissingBaseline => write!(f, "phase plan must start with PreIntervention"),
            Violation::RecipientOutOfRange { seat } => write!(f, "recipient seat {seat} is out of range"),
            Violation::ZeroTickRate => write!(f, "tick_hz must be positive"),
            Violation::BadParameter { name } => write!(f, "parameter `{name}` out of range"),
        }
    }
}

/// Collects every violation rather than stopping at the first.
pub fn validate_config(config: &SessionConfig) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();

    if config.n_seats < 2 {
        out.push(Violation::TooFewSeats { n_seats: config.n_seats });
    }
    if config.tick_hz == 0 {
        out.push(Violation::ZeroTickRate);
    }

    if config.phase_plan.is_empty() {
        out.push(Violation::EmptyPhasePlan);
    } else {
        let mut last = SessionPhase::Lobby;
        for span in &config.phase_plan {
            let plannable = matches!(
                span.phase,
                SessionPhase::PreIntervention | SessionPhase::Intervention | SessionPhase::Debrief
            );
            if !plannable || span.phase <= last {
                out.push(Violation::PhasePlanOrder { phase: span.phase });
            }
            last = last.max(span.phase);
        }
        if config.mode.needs_baseline() && config.phase_plan[0].phase != SessionPhase::PreIntervention {
            out.push(Violation::MissingBaseline);
        }
    }

    for seat in &config.recipients {
        if !config.has_seat(*seat) {
            out.push(Violation::RecipientOutOfRange { seat: seat.0 });
        }
    }

    match config.mode {
        Mode::Tic if config.n_seats >= 2 && !tic::assignment_feasible(config.n_seats) => {
            out.push(Violation::NoValidAssignment { n_seats: config.n_seats });
        }
        Mode::VcFeedback if config.feedback_source != FeedbackSourcePolicy::ExternalObserver => {
            let m = config.effective_recipients().len() as u32;
            if !tic::assignment_feasible(m) {
                out.push(Violation::NoValidAssignment { n_seats: m });
            }
        }
        _ => {}
    }

    let unit = |x: f64| (0.0..=1.0).contains(&x);
    let mut bad = |name: &str| out.push(Violation::BadParameter { name: name.to_string() });
    if !unit(config.speaking_threshold) {
        bad("speaking_threshold");
    }
    if !unit(config.brightness_floor) {
        bad("brightness_floor");
    }
    if config.reflect.half_life_ticks == 0 {
        bad("reflect.half_life_ticks");
    }
    if config.reflect.cell_count == 0 {
        bad("reflect.cell_count");
    }
    if !(0.0..1.0).contains(&config.reflect.activity_floor) {
        bad("reflect.activity_floor");
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tic(n: u32) -> SessionConfig {
        SessionConfig { n_seats: n, ..SessionConfig::for_mode(Mode::Tic) }
    }

    #[test]
    fn default_seat_counts() {
        assert_eq!(SessionConfig::for_mode(Mode::Tic).n_seats, 8);
        assert_eq!(SessionConfig::for_mode(Mode::Simulation).n_seats, 12);
    }

    #[test]
    fn tic_eight_ok_four_infeasible() {
        assert_eq!(validate_config(&tic(8)), Ok(()));
        let err = validate_config(&tic(4)).unwrap_err();
        assert_eq!(err, vec![Violation::NoValidAssignment { n_seats: 4 }]);
        assert_eq!(err[0].to_string(), "no valid assignment exists for 4 seats");
    }

    #[test]
    fn simulation_twelve_ok() {
        assert_eq!(validate_config(&SessionConfig::for_mode(Mode::Simulation)), Ok(()));
    }

    #[test]
    fn collects_multiple_violations() {
        let mut cfg = SessionConfig::for_mode(Mode::VcFeedback);
        cfg.phase_plan.clear();
        cfg.recipients = BTreeSet::from([SeatId(1), SeatId(30)]);
        cfg.n_seats = 1;
        let err = validate_config(&cfg).unwrap_err();
        assert!(err.contains(&Violation::TooFewSeats { n_seats: 1 }));
        assert!(err.contains(&Violation::EmptyPhasePlan));
        assert!(err.contains(&Violation::RecipientOutOfRange { seat: 30 }));
    }

    #[test]
    fn baseline_required_for_tic() {
        let mut cfg = tic(8);
        cfg.phase_plan.remove(0);
        assert_eq!(validate_config(&cfg), Err(vec![Violation::MissingBaseline]));
        let mut reflect = SessionConfig::for_mode(Mode::Reflect);
        reflect.phase_plan.remove(0);
        assert_eq!(validate_config(&reflect), Ok(()));
    }

    #[test]
    fn plan_order() {
        let mut cfg = SessionConfig::for_mode(Mode::Reflect);
        cfg.phase_plan.swap(1, 2);
        assert_eq!(validate_config(&cfg), Err(vec![Violation::PhasePlanOrder { phase: SessionPhase::Intervention }]));
    }

    #[test]
    fn participant_cycle_needs_feasible_recipients() {
        let mut cfg = SessionConfig::for_mode(Mode::VcFeedback);
        cfg.feedback_source = FeedbackSourcePolicy::ParticipantCycle;
        cfg.n_seats = 4;
        assert_eq!(validate_config(&cfg), Err(vec![Violation::NoValidAssignment { n_seats: 4 }]));
        cfg.feedback_source = FeedbackSourcePolicy::ExternalObserver;
        assert_eq!(validate_config(&cfg), Ok(()));
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let good = r#"{"mode":"Tic","n_seats":8,"phase_plan":[{"phase":"PreIntervention","duration_ticks":10}]}"#;
        let cfg = SessionConfig::from_json(good).unwrap();
        assert_eq!(cfg.tick_hz, 10);
        assert!(!cfg.show_idle_feedback);
        assert!(cfg.show_context_to_evaluator);
        let bad = r#"{"mode":"Tic","n_seats":8,"phase_plan":[],"colour":"red"}"#;
        assert!(matches!(SessionConfig::from_json(bad), Err(Error::MalformedPayload(_))));
    }
}
