//! Session metrics over event logs and coder annotations.
//!
//! Everything here is a pure function of a log. The equality coefficient is
//! descriptive only; nothing in the engines optimizes toward it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventRecord};
use crate::eventlog;
use crate::phase::SessionPhase;
use crate::seat::SeatId;
use crate::session::EngineState;

/// Midpoint of the 1–5 coding scale.
pub const SCALE_MIDPOINT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Involvement,
    Emotion,
    BodyLanguage,
    Leadership,
}

/// One coder's rating of one seat over a tick range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodedValue {
    pub start: u64,
    pub end: u64,
    pub seat: SeatId,
    pub dimension: Dimension,
    pub value: u8,
    pub coder_id: String,
}

impl CodedValue {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.value) {
            return Err(Error::malformed(format!("coded value {} outside 1..=5", self.value)));
        }
        if self.start > self.end {
            return Err(Error::malformed("coded range starts after it ends"));
        }
        Ok(())
    }
}

/// Inclusive tick range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickWindow {
    pub start: u64,
    pub end: u64,
}

impl TickWindow {
    pub fn new(start: u64, end: u64) -> Self {
        TickWindow { start, end }
    }

    pub fn all() -> Self {
        TickWindow { start: 0, end: u64::MAX }
    }

    pub fn contains(&self, tick: u64) -> bool {
        (self.start..=self.end).contains(&tick)
    }

    fn check(&self) -> Result<()> {
        if self.start > self.end {
            Err(Error::EmptyWindow)
        } else {
            Ok(())
        }
    }
}

/// Per-seat count of ticks in `window` with a sample above `threshold`.
pub fn speaking_ticks(log: &[EventRecord], window: TickWindow, n_seats: u32, threshold: f64) -> Result<Vec<u64>> {
    window.check()?;
    let mut counts = vec![0u64; n_seats as usize];
    for rec in log {
        if let Event::ActivitySample(s) = &rec.event {
            if window.contains(s.tick) && s.level > threshold {
                if let Some(c) = counts.get_mut(s.seat.index()) {
                    *c += 1;
                }
            }
        }
    }
    Ok(counts)
}

fn normalize(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Speaking shares with explicit seat count and threshold.
pub fn participation_shares_with(
    log: &[EventRecord],
    window: TickWindow,
    n_seats: u32,
    threshold: f64,
) -> Result<Vec<f64>> {
    Ok(normalize(&speaking_ticks(log, window, n_seats, threshold)?))
}

/// Speaking shares in `window`, using the seat count and threshold from the
/// log's setup record. All zeros when nobody spoke.
pub fn participation_shares(log: &[EventRecord], window: TickWindow) -> Result<Vec<f64>> {
    let cfg = eventlog::config_of(log)?;
    participation_shares_with(log, window, cfg.n_seats, cfg.speaking_threshold)
}

/// Mean distance of coded values from the scale midpoint.
pub fn extremity_index(coded: &[CodedValue]) -> Result<f64> {
    if coded.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = coded.iter().map(|c| (f64::from(c.value) - SCALE_MIDPOINT).abs()).sum();
    Ok(sum / coded.len() as f64)
}

/// Gini coefficient of a share vector. Equal shares and all-zero input give 0.
pub fn equality_gini(shares: &[f64]) -> f64 {
    let n = shares.len();
    let total: f64 = shares.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = shares.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted.iter().enumerate().map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * x).sum();
    (weighted / (n as f64 * total)).max(0.0)
}

/// Population variance of a share vector.
pub fn share_variance(shares: &[f64]) -> f64 {
    if shares.is_empty() {
        return 0.0;
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    shares.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / shares.len() as f64
}

/// Where the feedback channel went live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub seq: u64,
    pub tick: u64,
}

pub fn intervention_boundary(log: &[EventRecord]) -> Option<PhaseBoundary> {
    log.iter().find_map(|r| match r.event {
        Event::StartPhase { phase: SessionPhase::Intervention } => Some(PhaseBoundary { seq: r.seq, tick: r.tick }),
        _ => None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtremitySplit {
    pub pre: Option<f64>,
    pub post: Option<f64>,
    /// `post − pre`; positive means values moved toward the scale ends.
    pub contrast: Option<f64>,
    pub n_pre: usize,
    pub n_post: usize,
    /// Ranges that span the boundary and are left out of both sides.
    pub n_straddling: usize,
}

/// Splits coded values at `boundary_tick`: ranges ending before it are
/// baseline, ranges starting at or after it are intervention.
pub fn extremity_split(coded: &[CodedValue], boundary_tick: Option<u64>) -> ExtremitySplit {
    let (pre, post, straddling): (Vec<_>, Vec<_>, usize) = match boundary_tick {
        None => (coded.to_vec(), Vec::new(), 0),
        Some(b) => {
            let pre: Vec<_> = coded.iter().filter(|c| c.end < b).cloned().collect();
            let post: Vec<_> = coded.iter().filter(|c| c.start >= b).cloned().collect();
            let straddling = coded.len() - pre.len() - post.len();
            (pre, post, straddling)
        }
    };
    let pre_x = extremity_index(&pre).ok();
    let post_x = extremity_index(&post).ok();
    ExtremitySplit {
        pre: pre_x,
        post: post_x,
        contrast: pre_x.zip(post_x).map(|(a, b)| b - a),
        n_pre: pre.len(),
        n_post: post.len(),
        n_straddling: straddling,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtremityReport {
    pub per_coder: BTreeMap<String, ExtremitySplit>,
    /// Mean of the per-coder figures; no reconciliation between coders.
    pub mean: ExtremitySplit,
}

pub fn extremity_report(coded: &[CodedValue], boundary_tick: Option<u64>) -> ExtremityReport {
    let mut by_coder: BTreeMap<String, Vec<CodedValue>> = BTreeMap::new();
    for c in coded {
        by_coder.entry(c.coder_id.clone()).or_default().push(c.clone());
    }
    let per_coder: BTreeMap<String, ExtremitySplit> =
        by_coder.into_iter().map(|(id, values)| (id, extremity_split(&values, boundary_tick))).collect();

    let mean_of = |f: fn(&ExtremitySplit) -> Option<f64>| {
        let xs: Vec<f64> = per_coder.values().filter_map(f).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    let pre = mean_of(|s| s.pre);
    let post = mean_of(|s| s.post);
    let mean = ExtremitySplit {
        pre,
        post,
        contrast: pre.zip(post).map(|(a, b)| b - a),
        n_pre: per_coder.values().map(|s| s.n_pre).sum(),
        n_post: per_coder.values().map(|s| s.n_post).sum(),
        n_straddling: per_coder.values().map(|s| s.n_straddling).sum(),
    };
    ExtremityReport { per_coder, mean }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityPoint {
    pub seq: u64,
    pub tick: u64,
    pub value: f64,
}

/// Feedback intensity each seat was shown, sampled after every feedback input.
/// Balls report brightness; dots report their intensity axis.
pub fn feedback_intensity_series(log: &[EventRecord]) -> Result<BTreeMap<SeatId, Vec<IntensityPoint>>> {
    let cfg = eventlog::config_of(log)?;
    let mut out: BTreeMap<SeatId, Vec<IntensityPoint>> = BTreeMap::new();
    for step in eventlog::replay_states(log, &cfg)? {
        let (rec, state) = step?;
        let (seat, value) = match (&rec.event, &state.engine) {
            (Event::PedalInput(p), EngineState::Tic(t)) => {
                let target = t.cycle.target_of(p.seat).ok_or(Error::UnknownSeat(p.seat))?;
                (target, t.balls.brightness[target.index()])
            }
            (Event::SliderInput(s), EngineState::Vc(v)) => (s.target, v.dot(s.target).map_or(0.0, |d| d.intensity)),
            _ => continue,
        };
        out.entry(seat).or_default().push(IntensityPoint { seq: rec.seq, tick: rec.tick, value });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: crate::config::Mode,
    pub n_seats: u32,
    pub events: usize,
    pub ticks: u64,
    pub shares: Vec<f64>,
    pub gini: f64,
    pub boundary: Option<PhaseBoundary>,
    pub shares_pre: Option<Vec<f64>>,
    pub shares_post: Option<Vec<f64>>,
    pub extremity: ExtremityReport,
    pub feedback_intensity: BTreeMap<SeatId, Vec<IntensityPoint>>,
}

/// Full report for a log. Coded values come from `annotations` when given,
/// otherwise from the log's own annotation records.
pub fn build_report(log: &[EventRecord], annotations: Option<&[CodedValue]>) -> Result<MetricsReport> {
    let cfg = eventlog::config_of(log)?;
    let state = eventlog::replay(log, &cfg)?;
    let shares = participation_shares(log, TickWindow::all())?;
    let boundary = intervention_boundary(log);
    let (shares_pre, shares_post) = match boundary {
        Some(b) if b.tick > 0 => (
            Some(participation_shares(log, TickWindow::new(0, b.tick - 1))?),
            Some(participation_shares(log, TickWindow::new(b.tick, u64::MAX))?),
        ),
        Some(b) => (None, Some(participation_shares(log, TickWindow::new(b.tick, u64::MAX))?)),
        None => (None, None),
    };
    let logged: Vec<CodedValue>;
    let coded = match annotations {
        Some(a) => a,
        None => {
            logged = log
                .iter()
                .filter_map(|r| match &r.event {
                    Event::Annotation(a) => a.coded.clone(),
                    _ => None,
                })
                .collect();
            &logged
        }
    };
    Ok(MetricsReport {
        mode: cfg.mode,
        n_seats: cfg.n_seats,
        events: log.len(),
        ticks: state.tick,
        gini: equality_gini(&shares),
        shares,
        boundary,
        shares_pre,
        shares_post,
        extremity: extremity_report(coded, boundary.map(|b| b.tick)),
        feedback_intensity: feedback_intensity_series(log)?,
    })
}
