//! Scripted participants for desk-scale experiments.
//!
//! Each agent has one speaking propensity θ that feedback nudges up or down:
//! `θ ← clamp(θ + ρ·η·intensity·d)`, where `d ∈ [−1, 1]` points toward
//! "participate more". An agent speaks in a tick with probability
//! `θ·(1 − κ·others)`, drawn from its own seeded generator.
//!
//! [`run_scenario`] pushes agents through a real [`Session`], so the log it
//! produces is an ordinary session log that replays like any other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, SessionConfig, Violation};
use crate::error::{Error, Result};
use crate::event::{ActivitySample, Event, EventRecord, JoinPayload};
use crate::phase::SessionPhase;
use crate::seat::SeatId;
use crate::server::{Origin, Session};
use crate::session::{EngineState, SessionState};
use crate::tic::PedalInput;
use crate::vc::{self, SliderAxis, SliderInput};

fn default_learning_rate() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    /// θ: baseline chance of speaking in a tick.
    pub talkativeness: f64,
    /// ρ: positive conforms to feedback, zero ignores it, negative rebels.
    #[serde(default)]
    pub responsiveness: f64,
    /// κ: how much others speaking suppresses this agent.
    #[serde(default)]
    pub interruption_aversion: f64,
    /// η
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AgentParams {
    pub fn new(talkativeness: f64, responsiveness: f64, seed: u64) -> Self {
        AgentParams {
            talkativeness,
            responsiveness,
            interruption_aversion: 0.0,
            learning_rate: default_learning_rate(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let mut bad = Vec::new();
        if !unit(self.talkativeness) {
            bad.push("talkativeness");
        }
        if !(-1.0..=1.0).contains(&self.responsiveness) {
            bad.push("responsiveness");
        }
        if !unit(self.interruption_aversion) {
            bad.push("interruption_aversion");
        }
        if !unit(self.learning_rate) {
            bad.push("learning_rate");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                bad.into_iter().map(|name| Violation::BadParameter { name: name.to_string() }).collect(),
            ))
        }
    }
}

/// Feedback as an agent perceives it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentFeedback {
    /// −1 asks the agent to stop, +1 to participate more.
    pub direction: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub theta: f64,
    rng: ChaCha8Rng,
}

impl AgentState {
    pub fn new(params: &AgentParams) -> Self {
        AgentState { theta: params.talkativeness.clamp(0.0, 1.0), rng: ChaCha8Rng::seed_from_u64(params.seed) }
    }
}

/// Speak probability for propensity `theta`.
pub fn speak_probability(theta: f64, aversion: f64, others_speaking_fraction: f64) -> f64 {
    (theta * (1.0 - aversion * others_speaking_fraction.clamp(0.0, 1.0))).clamp(0.0, 1.0)
}

/// One tick of agent behavior. Exactly one draw is taken per call, so the
/// random stream is independent of the feedback the agent receives.
pub fn step_agent(
    state: &AgentState,
    params: &AgentParams,
    feedback: Option<AgentFeedback>,
    others_speaking_fraction: f64,
) -> (bool, AgentState) {
    let mut next = state.clone();
    if let Some(fb) = feedback {
        let nudge = params.responsiveness * params.learning_rate * fb.intensity * fb.direction;
        if nudge.is_finite() {
            next.theta = (next.theta + nudge).clamp(0.0, 1.0);
        }
    }
    let p = speak_probability(next.theta, params.interruption_aversion, others_speaking_fraction);
    let speaks = next.rng.random::<f64>() < p;
    (speaks, next)
}

/// An input injected at the start of tick `tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedInput {
    pub tick: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum FeedbackPolicy {
    /// No feedback inputs; displays stay neutral.
    #[default]
    None,
    /// Every review interval, push over-share seats toward red and
    /// under-share seats toward violet, in proportion to the deviation.
    EqualizeShares,
    Script(Vec<ScriptedInput>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    pub review_interval: u64,
    /// Per-tick chance that an agent turns its listening dial.
    pub dial_change_prob: f64,
    pub session_id: String,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions { review_interval: 50, dial_change_prob: 0.02, session_id: "sim".to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub log: Vec<EventRecord>,
    pub state: SessionState,
    /// `speaking[t][i]`: whether seat `i` spoke during tick `t`.
    pub speaking: Vec<Vec<bool>>,
    /// Propensity of each agent after the run.
    pub theta: Vec<f64>,
    /// Scripted inputs the session refused, with the refusal.
    pub rejected: Vec<(ScriptedInput, Error)>,
}

impl ScenarioRun {
    pub fn to_jsonl(&self) -> String {
        self.log.iter().map(|r| r.to_json_line() + "\n").collect()
    }
}

/// Shares spoken since the last review, minus expected shares, over the
/// expected share. Positive means the seat spoke more than its part.
fn relative_deviation(state: &SessionState, since: &[u64]) -> Vec<f64> {
    let n = state.config.n_seats;
    let window: Vec<u64> = state.activity.speaking_ticks.iter().zip(since).map(|(now, then)| now - then).collect();
    let total: u64 = window.iter().sum();
    state
        .config
        .seats()
        .map(|seat| {
            let expected = vc::expected_share(&state.profiles, seat, n);
            if total == 0 || expected <= 0.0 {
                return 0.0;
            }
            let share = window[seat.index()] as f64 / total as f64;
            ((share - expected) / expected).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Inputs the EqualizeShares policy submits for the current review.
fn equalize_inputs(state: &SessionState, deviation: &[f64]) -> Vec<Event> {
    let mut out = Vec::new();
    match &state.engine {
        EngineState::Vc(v) => {
            for &target in &v.recipients {
                let dev = deviation[target.index()];
                let strength = dev.abs().min(1.0);
                let hue = 0.5 - 0.5 * dev.signum() * strength;
                for source in v.sources.controllers_of(target) {
                    for (axis, value) in
                        [(SliderAxis::Hue, hue), (SliderAxis::Size, strength), (SliderAxis::Intensity, strength)]
                    {
                        out.push(Event::SliderInput(SliderInput {
                            source_id: source.source_id.clone(),
                            target,
                            axis,
                            value,
                        }));
                    }
                }
            }
        }
        EngineState::Tic(t) => {
            for evaluator in state.config.seats() {
                if let Some(target) = t.cycle.target_of(evaluator) {
                    out.push(Event::PedalInput(PedalInput {
                        seat: evaluator,
                        position: 0.5 - 0.5 * deviation[target.index()],
                    }));
                }
            }
        }
        EngineState::Territory(_) | EngineState::Routing(_) => {}
    }
    out
}

/// What seat `seat` reads off its own feedback display.
fn perceived_feedback(state: &SessionState, seat: SeatId) -> Option<AgentFeedback> {
    if !state.feedback_visible() {
        return None;
    }
    match &state.engine {
        EngineState::Vc(v) => v
            .dot(seat)
            .map(|dot| AgentFeedback { direction: vc::semantic_direction(dot.hue), intensity: dot.intensity }),
        EngineState::Tic(t) => {
            t.balls.ball(seat).map(|(size, _)| AgentFeedback { direction: 2.0 * size - 1.0, intensity: 1.0 })
        }
        EngineState::Territory(t) => {
            let total: u32 = t.cells.iter().sum();
            if total == 0 {
                return None;
            }
            let expected = vc::expected_share(&state.profiles, seat, state.config.n_seats);
            let share = t.cells[seat.index()] as f64 / total as f64;
            Some(AgentFeedback { direction: ((expected - share) / expected).clamp(-1.0, 1.0), intensity: 1.0 })
        }
        EngineState::Routing(_) => None,
    }
}

fn millis(tick: u64, hz: u32) -> u64 {
    tick * 1000 / u64::from(hz.max(1))
}

/// Runs `ticks` clock ticks of a seated scenario and returns its log.
///
/// Setup joins every seat and starts the baseline; the phase plan drives
/// everything after that. The run stops early if the plan closes the session.
pub fn run_scenario(
    config: &SessionConfig,
    agents: &[AgentParams],
    ticks: u64,
    policy: &FeedbackPolicy,
    options: &ScenarioOptions,
) -> Result<ScenarioRun> {
    if agents.len() != config.n_seats as usize {
        return Err(Error::malformed(format!("{} agents for {} seats", agents.len(), config.n_seats)));
    }
    for a in agents {
        a.validate()?;
    }
    if options.review_interval == 0 {
        return Err(Error::InvalidConfig(vec![Violation::BadParameter { name: "review_interval".to_string() }]));
    }

    let hz = config.tick_hz;
    let server = Origin::Server;
    let (mut session, _) = Session::create(options.session_id.clone(), config.clone(), None, None, 0)?;
    for seat in config.seats() {
        let join = JoinPayload { seat, display_name: format!("agent-{}", seat.label()), role_expected_share: None };
        session.submit(&server, Event::Join(join), 0)?;
    }
    session.submit(&server, Event::StartPhase { phase: SessionPhase::PreIntervention }, 0)?;

    let n = agents.len();
    let mut minds: Vec<AgentState> = agents.iter().map(AgentState::new).collect();
    let mut pending: Vec<Option<AgentFeedback>> = vec![None; n];
    let mut last_spoke = vec![false; n];
    let mut review_base = vec![0u64; n];
    let mut speaking = Vec::with_capacity(ticks as usize);
    let mut rejected = Vec::new();

    for _ in 0..ticks {
        if session.state().phase.is_closed() {
            break;
        }
        let tick = session.state().tick;
        let ts = millis(tick, hz);

        if let FeedbackPolicy::Script(script) = policy {
            for input in script.iter().filter(|s| s.tick == tick) {
                if let Err(e) = session.submit(&server, input.event.clone(), ts) {
                    rejected.push((input.clone(), e));
                }
            }
        }

        let talking = last_spoke.iter().filter(|s| **s).count();
        let mut spoke = vec![false; n];
        for (i, mind) in minds.iter_mut().enumerate() {
            let others = if n > 1 { (talking - usize::from(last_spoke[i])) as f64 / (n - 1) as f64 } else { 0.0 };
            let (speaks, next) = step_agent(mind, &agents[i], pending[i].take(), others);
            *mind = next;
            spoke[i] = speaks;
        }

        if config.mode == Mode::Simulation {
            for (i, mind) in minds.iter_mut().enumerate() {
                if mind.rng.random::<f64>() < options.dial_change_prob {
                    let channel = SeatId(mind.rng.random_range(0..config.n_seats));
                    session.submit(&server, Event::SetListen { seat: SeatId(i as u32), channel }, ts)?;
                }
            }
        }

        for (i, speaks) in spoke.iter().enumerate() {
            if *speaks {
                let sample = ActivitySample { seat: SeatId(i as u32), tick, level: 1.0 };
                session.submit(&server, Event::ActivitySample(sample), ts)?;
            }
        }

        session.clock_tick(ts)?;
        speaking.push(spoke.clone());
        last_spoke = spoke;

        let state = session.state();
        let in_phase = state.tick - state.phase_started_tick;
        if state.phase == SessionPhase::Intervention {
            if in_phase == 0 {
                review_base = state.activity.speaking_ticks.clone();
            } else if in_phase % options.review_interval == 0 {
                if *policy == FeedbackPolicy::EqualizeShares {
                    let deviation = relative_deviation(state, &review_base);
                    let ts = millis(state.tick, hz);
                    for event in equalize_inputs(state, &deviation) {
                        session.submit(&server, event, ts)?;
                    }
                }
                let state = session.state();
                review_base = state.activity.speaking_ticks.clone();
                for (i, slot) in pending.iter_mut().enumerate() {
                    *slot = perceived_feedback(state, SeatId(i as u32));
                }
            }
        }
    }

    Ok(ScenarioRun {
        log: session.records().to_vec(),
        state: session.state().clone(),
        speaking,
        theta: minds.iter().map(|m| m.theta).collect(),
        rejected,
    })
}

/// Population variance of per-seat speaking shares over ticks `[from, to)`.
pub fn share_variance_between(speaking: &[Vec<bool>], from: usize, to: usize) -> f64 {
    let Some(first) = speaking.first() else { return 0.0 };
    let mut counts = vec![0u64; first.len()];
    for row in &speaking[from.min(speaking.len())..to.min(speaking.len())] {
        for (c, s) in counts.iter_mut().zip(row) {
            *c += u64::from(*s);
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let shares: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
    crate::metrics::share_variance(&shares)
}
