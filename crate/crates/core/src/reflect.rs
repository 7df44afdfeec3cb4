//! Territory mirror of vocal participation.
//!
//! Per-seat speaking levels are smoothed with an exponential moving average
//! and a fixed pool of display cells is split between seats in proportion to
//! their smoothed activity (largest-remainder apportionment).

use serde::{Deserialize, Serialize};

use crate::seat::SeatId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReflectParams {
    pub half_life_ticks: u32,
    pub cell_count: u32,
    pub activity_floor: f64,
}

impl Default for ReflectParams {
    fn default() -> Self {
        ReflectParams { half_life_ticks: 300, cell_count: 64, activity_floor: 0.02 }
    }
}

impl ReflectParams {
    /// Per-tick EMA weight: `1 − 2^(−1/half_life)`.
    pub fn alpha(&self) -> f64 {
        1.0 - (-1.0 / f64::from(self.half_life_ticks)).exp2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerritoryState {
    pub smoothed: Vec<f64>,
    pub cells: Vec<u32>,
}

impl TerritoryState {
    pub fn new(n_seats: u32) -> Self {
        TerritoryState { smoothed: vec![0.0; n_seats as usize], cells: vec![0; n_seats as usize] }
    }

    pub fn cells_of(&self, seat: SeatId) -> Option<u32> {
        self.cells.get(seat.index()).copied()
    }
}

#[inline]
pub fn smooth_level(prev: f64, level: f64, alpha: f64) -> f64 {
    ((1.0 - alpha) * prev + alpha * level).clamp(0.0, 1.0)
}

/// One smoothing step for every seat; `samples[i]` is seat `i`'s level this tick.
pub fn smooth_activity(prev: &TerritoryState, samples: &[f64], params: &ReflectParams) -> Vec<f64> {
    let alpha = params.alpha();
    prev.smoothed
        .iter()
        .enumerate()
        .map(|(i, &s)| smooth_level(s, samples.get(i).copied().unwrap_or(0.0), alpha))
        .collect()
}

/// Splits `params.cell_count` cells between seats by smoothed activity.
/// Below the activity floor nothing is shown.
pub fn allocate_territory(smoothed: &[f64], params: &ReflectParams) -> Vec<u32> {
    let total: f64 = smoothed.iter().sum();
    if total <= params.activity_floor {
        return vec![0; smoothed.len()];
    }
    largest_remainder(smoothed, params.cell_count)
}

/// Hamilton apportionment of `seats` units by `weights`; remainder ties go to
/// the lowest index. All-zero weights yield all zeros.
pub fn largest_remainder(weights: &[f64], seats: u32) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|&w| w * f64::from(seats) / total).collect();
    let mut alloc: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = alloc.iter().sum();
    let leftover = seats.saturating_sub(assigned) as usize;

    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in order.iter().take(leftover) {
        alloc[i] += 1;
    }
    alloc
}
