//! Feedback dots for video-conference self panels.
//!
//! A recipient's dot has three independent axes driven by slider inputs:
//! hue along red→violet, size, and intensity. Inputs come from an external
//! observer, from participant evaluators assigned along a constrained cycle,
//! or both.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::{FeedbackSourcePolicy, SessionConfig};
use crate::error::{Error, Result};
use crate::event::EventRecord;
use crate::metrics::{self, TickWindow};
use crate::seat::SeatId;
use crate::session::ParticipantProfile;
use crate::tic;

pub const OBSERVER_SOURCE_ID: &str = "observer";

pub fn evaluator_source_id(seat: SeatId) -> String {
    format!("seat-{}", seat.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDot {
    pub hue: f64,
    pub size: f64,
    pub intensity: f64,
}

impl Default for FeedbackDot {
    /// Mid-spectrum hue with nothing shown.
    fn default() -> Self {
        FeedbackDot { hue: 0.5, size: 0.0, intensity: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliderAxis {
    Hue,
    Size,
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliderInput {
    pub source_id: String,
    pub target: SeatId,
    pub axis: SliderAxis,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    ExternalObserver,
    ParticipantEvaluator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSource {
    pub source_id: String,
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seat: Option<SeatId>,
    pub targets: BTreeSet<SeatId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceRegistry {
    sources: BTreeMap<String, FeedbackSource>,
}

impl SourceRegistry {
    pub fn insert(&mut self, source: FeedbackSource) {
        if let (SourceKind::ParticipantEvaluator, Some(seat)) = (source.kind, source.seat) {
            debug_assert!(!source.targets.contains(&seat), "evaluator targets itself");
        }
        self.sources.insert(source.source_id.clone(), source);
    }

    pub fn get(&self, source_id: &str) -> Option<&FeedbackSource> {
        self.sources.get(source_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeedbackSource> {
        self.sources.values()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Every source allowed to drive `target`.
    pub fn controllers_of(&self, target: SeatId) -> impl Iterator<Item = &FeedbackSource> {
        self.sources.values().filter(move |s| s.targets.contains(&target))
    }

    pub fn is_authorized(&self, source_id: &str, target: SeatId) -> bool {
        self.get(source_id).is_some_and(|s| s.targets.contains(&target))
    }
}

/// Builds the source registry for a session.
///
/// The participant cycle runs over the recipients in seat order, treated as
/// their own ring: neighbor and opposite exclusions apply to that ring.
pub fn assign_feedback_targets(config: &SessionConfig, seed: u64) -> Result<SourceRegistry> {
    let recipients: Vec<SeatId> = config.effective_recipients().into_iter().collect();
    let mut registry = SourceRegistry::default();

    if matches!(config.feedback_source, FeedbackSourcePolicy::ExternalObserver | FeedbackSourcePolicy::Mixed) {
        registry.insert(FeedbackSource {
            source_id: OBSERVER_SOURCE_ID.to_string(),
            kind: SourceKind::ExternalObserver,
            seat: None,
            targets: recipients.iter().copied().collect(),
        });
    }

    if matches!(config.feedback_source, FeedbackSourcePolicy::ParticipantCycle | FeedbackSourcePolicy::Mixed) {
        let cycle = tic::generate_assignment(recipients.len() as u32, seed)?;
        for (pos, &seat) in recipients.iter().enumerate() {
            let target = recipients[cycle.targets()[pos].index()];
            registry.insert(FeedbackSource {
                source_id: evaluator_source_id(seat),
                kind: SourceKind::ParticipantEvaluator,
                seat: Some(seat),
                targets: BTreeSet::from([target]),
            });
        }
    }
    Ok(registry)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcState {
    pub dots: BTreeMap<SeatId, FeedbackDot>,
    pub sources: SourceRegistry,
    pub recipients: BTreeSet<SeatId>,
}

impl VcState {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        let recipients = config.effective_recipients();
        Ok(VcState {
            dots: recipients.iter().map(|&s| (s, FeedbackDot::default())).collect(),
            sources: assign_feedback_targets(config, config.rng_seed)?,
            recipients,
        })
    }

    pub fn dot(&self, seat: SeatId) -> Option<FeedbackDot> {
        self.dots.get(&seat).copied()
    }
}

/// Sets one axis of one dot. Phase gating is the caller's job.
pub fn apply_slider(state: &VcState, n_seats: u32, input: &SliderInput) -> Result<VcState> {
    if input.value.is_nan() {
        return Err(Error::malformed("slider value is NaN"));
    }
    if input.target.0 >= n_seats {
        return Err(Error::UnknownSeat(input.target));
    }
    if !state.recipients.contains(&input.target) {
        return Err(Error::NotARecipient(input.target));
    }
    if !state.sources.is_authorized(&input.source_id, input.target) {
        return Err(Error::UnauthorizedSource { source_id: input.source_id.clone(), target: input.target });
    }
    let value = input.value.clamp(0.0, 1.0);
    let mut next = state.clone();
    let dot = next.dots.entry(input.target).or_default();
    match input.axis {
        SliderAxis::Hue => dot.hue = value,
        SliderAxis::Size => dot.size = value,
        SliderAxis::Intensity => dot.intensity = value,
    }
    Ok(next)
}

/// Red (0) reads as "please stop", violet (1) as "participate more".
pub fn semantic_direction(hue: f64) -> f64 {
    2.0 * hue.clamp(0.0, 1.0) - 1.0
}

/// Expected share for a seat; undeclared roles default to an equal split.
pub fn expected_share(profiles: &BTreeMap<SeatId, ParticipantProfile>, seat: SeatId, n_seats: u32) -> f64 {
    profiles.get(&seat).and_then(|p| p.role_expected_share).unwrap_or(1.0 / f64::from(n_seats))
}

/// Seat's share of speaking ticks within `window`, minus its role's expected share.
pub fn relative_participation(
    log: &[EventRecord],
    window: TickWindow,
    seat: SeatId,
    profiles: &BTreeMap<SeatId, ParticipantProfile>,
    n_seats: u32,
    threshold: f64,
) -> Result<f64> {
    let shares = metrics::participation_shares_with(log, window, n_seats, threshold)?;
    let share = shares.get(seat.index()).copied().ok_or(Error::UnknownSeat(seat))?;
    Ok(share - expected_share(profiles, seat, n_seats))
}
