//! Constrained evaluator cycles and pedal-driven feedback balls.
//!
//! Every seat's pedal controls exactly one other seat's ball. The mapping is a
//! single cycle through all seats that never assigns a seat to itself, to a
//! direct neighbor, or (on an even table) to the seat directly opposite.
//! Ball size and brightness are linked: brightness rises with size from a
//! visible floor.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seat::{Ring, SeatId};

pub const DEFAULT_BRIGHTNESS_FLOOR: f64 = 0.2;

/// Size a ball shows before any pedal has touched it.
pub const NEUTRAL_SIZE: f64 = 0.5;

/// Upper bound on rejected draws before the generator gives up. With the
/// acceptance rates observed for n ≤ 64 this is never reached.
const MAX_DRAWS: usize = 10_000_000;

/// `targets[i]` is the seat whose ball seat `i`'s pedal controls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentCycle {
    targets: Vec<SeatId>,
}

impl AssignmentCycle {
    /// Wraps a target vector after checking every assignment rule.
    pub fn new(targets: Vec<SeatId>) -> std::result::Result<Self, AssignmentViolation> {
        let raw: Vec<u32> = targets.iter().map(|s| s.0).collect();
        validate_assignment(&raw, targets.len() as u32)?;
        Ok(AssignmentCycle { targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target_of(&self, evaluator: SeatId) -> Option<SeatId> {
        self.targets.get(evaluator.index()).copied()
    }

    pub fn evaluator_of(&self, target: SeatId) -> Option<SeatId> {
        self.targets.iter().position(|&t| t == target).map(|i| SeatId(i as u32))
    }

    pub fn targets(&self) -> &[SeatId] {
        &self.targets
    }

    /// Walks the cycle from seat 0: `[0, σ(0), σ²(0), …]`.
    pub fn walk(&self) -> Vec<SeatId> {
        let mut order = Vec::with_capacity(self.targets.len());
        if self.targets.is_empty() {
            return order;
        }
        let mut at = SeatId(0);
        loop {
            order.push(at);
            at = self.targets[at.index()];
            if at == SeatId(0) {
                break;
            }
        }
        order
    }
}

impl fmt::Display for AssignmentCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seat in self.walk() {
            write!(f, "{}→", seat.0)?;
        }
        write!(f, "0")
    }
}

/// First rule an assignment breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AssignmentViolation {
    NotAPermutation,
    NotSingleCycle { cycle_len: u32 },
    SelfControl { seat: u32 },
    Neighbor { seat: u32, target: u32 },
    Opposite { seat: u32, target: u32 },
}

impl fmt::Display for AssignmentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignmentViolation::NotAPermutation => write!(f, "not a permutation"),
            AssignmentViolation::NotSingleCycle { cycle_len } => {
                write!(f, "not a single cycle (cycle through seat 0 has length {cycle_len})")
            }
            AssignmentViolation::SelfControl { seat } => write!(f, "seat {seat} controls itself"),
            AssignmentViolation::Neighbor { seat, target } => {
                write!(f, "seat {seat} controls neighbor {target}")
            }
            AssignmentViolation::Opposite { seat, target } => {
                write!(f, "seat {seat} controls opposite seat {target}")
            }
        }
    }
}

impl std::error::Error for AssignmentViolation {}

/// Checks `sigma` against every assignment rule.
///
/// Rules are checked in this order: permutation, then per-seat rules (self,
/// neighbor, opposite) scanning seats from 0, then the single-cycle rule. A
/// self-assignment always also breaks the single cycle, so the per-seat scan
/// runs first to report the more specific rule. The opposite rule is skipped
/// on odd tables.
pub fn validate_assignment(sigma: &[u32], n_seats: u32) -> std::result::Result<(), AssignmentViolation> {
    let n = n_seats as usize;
    if sigma.len() != n {
        return Err(AssignmentViolation::NotAPermutation);
    }
    let mut seen = vec![false; n];
    for &t in sigma {
        let t = t as usize;
        if t >= n || seen[t] {
            return Err(AssignmentViolation::NotAPermutation);
        }
        seen[t] = true;
    }

    let ring = Ring::new(n_seats);
    for (i, &t) in sigma.iter().enumerate() {
        let seat = SeatId(i as u32);
        let target = SeatId(t);
        if seat == target {
            return Err(AssignmentViolation::SelfControl { seat: seat.0 });
        }
        if ring.are_neighbors(seat, target) {
            return Err(AssignmentViolation::Neighbor { seat: seat.0, target: t });
        }
        if ring.opposite(seat) == Some(target) {
            return Err(AssignmentViolation::Opposite { seat: seat.0, target: t });
        }
    }

    let mut len = 0u32;
    let mut at = 0usize;
    loop {
        at = sigma[at] as usize;
        len += 1;
        if at == 0 {
            break;
        }
    }
    if len as usize != n {
        return Err(AssignmentViolation::NotSingleCycle { cycle_len: len });
    }
    Ok(())
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Whether any valid cycle exists on `n_seats` seats.
///
/// A constant step `k` with `gcd(k, n) = 1` and `2 ≤ k ≤ n − 2` is always a
/// valid cycle (it cannot equal `n/2` on an even table). Tables without such a
/// step are tiny, and are settled by exhaustive search.
pub fn assignment_feasible(n_seats: u32) -> bool {
    if n_seats < 2 {
        return false;
    }
    if (2..n_seats.saturating_sub(1)).any(|k| gcd(k, n_seats) == 1) {
        return true;
    }
    search_cycle(n_seats).is_some()
}

/// Depth-first search for any valid cycle, starting at seat 0.
fn search_cycle(n_seats: u32) -> Option<Vec<u32>> {
    fn extend(ring: Ring, path: &mut Vec<u32>, used: &mut [bool]) -> bool {
        let n = ring.len();
        let last = SeatId(*path.last().unwrap());
        if path.len() == n as usize {
            return allowed(ring, last, SeatId(path[0]));
        }
        for next in 0..n {
            if !used[next as usize] && allowed(ring, last, SeatId(next)) {
                used[next as usize] = true;
                path.push(next);
                if extend(ring, path, used) {
                    return true;
                }
                path.pop();
                used[next as usize] = false;
            }
        }
        false
    }
    fn allowed(ring: Ring, from: SeatId, to: SeatId) -> bool {
        from != to && !ring.are_neighbors(from, to) && ring.opposite(from) != Some(to)
    }

    let ring = Ring::new(n_seats);
    let mut used = vec![false; n_seats as usize];
    used[0] = true;
    let mut path = vec![0];
    if !extend(ring, &mut path, &mut used) {
        return None;
    }
    let mut sigma = vec![0; n_seats as usize];
    for w in 0..path.len() {
        sigma[path[w] as usize] = path[(w + 1) % path.len()];
    }
    Some(sigma)
}

/// Sattolo's shuffle: a uniformly random single cycle over `0..n`.
fn random_cycle(n: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut items: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        items.swap(i, j);
    }
    items
}

/// Draws a valid evaluator cycle, uniformly among all valid cycles, from a
/// generator seeded with `seed`.
pub fn generate_assignment(n_seats: u32, seed: u64) -> Result<AssignmentCycle> {
    if !assignment_feasible(n_seats) {
        return Err(Error::NoValidAssignment { n_seats });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let sigma = random_cycle(n_seats as usize, &mut rng);
        if validate_assignment(&sigma, n_seats).is_ok() {
            return Ok(AssignmentCycle { targets: sigma.into_iter().map(SeatId).collect() });
        }
    }
    // Feasible but unlucky; fall back to a deterministic witness.
    let sigma = search_cycle(n_seats).ok_or(Error::NoValidAssignment { n_seats })?;
    Ok(AssignmentCycle { targets: sigma.into_iter().map(SeatId).collect() })
}

pub fn linked_brightness(size: f64, floor: f64) -> f64 {
    floor + (1.0 - floor) * size
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedalInput {
    pub seat: SeatId,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub size: Vec<f64>,
    pub brightness: Vec<f64>,
    pub floor: f64,
}

impl BallState {
    pub fn neutral(n_seats: u32, floor: f64) -> Self {
        let n = n_seats as usize;
        BallState { size: vec![NEUTRAL_SIZE; n], brightness: vec![linked_brightness(NEUTRAL_SIZE, floor); n], floor }
    }

    pub fn ball(&self, seat: SeatId) -> Option<(f64, f64)> {
        Some((*self.size.get(seat.index())?, self.brightness[seat.index()]))
    }
}

/// Applies a pedal position to the ball its evaluator controls.
pub fn apply_pedal(state: &BallState, cycle: &AssignmentCycle, input: PedalInput) -> Result<BallState> {
    if input.position.is_nan() {
        return Err(Error::malformed("pedal position is NaN"));
    }
    let target = cycle.target_of(input.seat).ok_or(Error::UnknownSeat(input.seat))?;
    let size = input.position.clamp(0.0, 1.0);
    let mut next = state.clone();
    next.size[target.index()] = size;
    next.brightness[target.index()] = linked_brightness(size, state.floor);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicState {
    pub cycle: AssignmentCycle,
    pub balls: BallState,
}

#[cfg(test)]
mod tests {
    use super::*;

    const EIGHT: [u32; 8] = [5, 7, 4, 1, 6, 3, 0, 2];

    #[test]
    fn eight_seat_cycle_walks_in_order() {
        let cycle = AssignmentCycle::new(EIGHT.iter().copied().map(SeatId).collect()).unwrap();
        let walk: Vec<u32> = cycle.walk().into_iter().map(|s| s.0).collect();
        assert_eq!(walk, vec![0, 5, 3, 1, 7, 2, 4, 6]);
        assert_eq!(cycle.to_string(), "0→5→3→1→7→2→4→6→0");
        assert_eq!(cycle.evaluator_of(SeatId(5)), Some(SeatId(0)));
    }

    #[test]
    fn neighbor_and_opposite_rules() {
        // 0→1 then a valid-looking rest; the neighbor rule trips first at seat 0.
        let sigma = [1, 3, 0, 2];
        assert_eq!(validate_assignment(&sigma, 4), Err(AssignmentViolation::Neighbor { seat: 0, target: 1 }));
        let mut sigma = EIGHT;
        sigma.swap(0, 4);
        assert_eq!(validate_assignment(&sigma, 8), Err(AssignmentViolation::Neighbor { seat: 4, target: 5 }));
        let sigma = [4, 6, 7, 0, 2, 1, 3, 5];
        assert_eq!(validate_assignment(&sigma, 8), Err(AssignmentViolation::Opposite { seat: 0, target: 4 }));
    }

    #[test]
    fn self_and_permutation_rules() {
        assert_eq!(validate_assignment(&[0, 2, 1], 3), Err(AssignmentViolation::SelfControl { seat: 0 }));
        assert_eq!(validate_assignment(&[1, 1, 0], 3), Err(AssignmentViolation::NotAPermutation));
        assert_eq!(validate_assignment(&[1, 0], 3), Err(AssignmentViolation::NotAPermutation));
        assert_eq!(validate_assignment(&[1, 2, 9], 3), Err(AssignmentViolation::NotAPermutation));
    }

    #[test]
    fn two_cycles_are_rejected() {
        // Steps of +2 on 8 seats split into the even and odd seats.
        let sigma = [2, 3, 4, 5, 6, 7, 0, 1];
        assert_eq!(validate_assignment(&sigma, 8), Err(AssignmentViolation::NotSingleCycle { cycle_len: 4 }));
    }

    #[test]
    fn feasibility_table() {
        let feasible: Vec<u32> = (2..=12).filter(|&n| assignment_feasible(n)).collect();
        assert_eq!(feasible, vec![5, 7, 8, 9, 10, 11, 12]);
    }

    #[test]
    fn infeasible_sizes_error() {
        for n in [2, 3, 4, 6] {
            assert_eq!(generate_assignment(n, 7), Err(Error::NoValidAssignment { n_seats: n }));
        }
    }

    #[test]
    fn five_seats_step_two() {
        let cycle = generate_assignment(5, 1).unwrap();
        let t: Vec<u32> = cycle.targets().iter().map(|s| s.0).collect();
        assert!(t == vec![2, 3, 4, 0, 1] || t == vec![3, 4, 0, 1, 2], "{t:?}");
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        assert_eq!(generate_assignment(8, 42).unwrap(), generate_assignment(8, 42).unwrap());
    }

    #[test]
    fn pedal_drives_target_ball() {
        let cycle = AssignmentCycle::new(EIGHT.iter().copied().map(SeatId).collect()).unwrap();
        let balls = BallState::neutral(8, DEFAULT_BRIGHTNESS_FLOOR);
        let next = apply_pedal(&balls, &cycle, PedalInput { seat: SeatId(0), position: 1.0 }).unwrap();
        assert_eq!(next.ball(SeatId(5)), Some((1.0, 1.0)));
        for i in (0..8).filter(|&i| i != 5) {
            assert_eq!(next.ball(SeatId(i)), balls.ball(SeatId(i)));
        }
        let zero = apply_pedal(&next, &cycle, PedalInput { seat: SeatId(0), position: 0.0 }).unwrap();
        assert_eq!(zero.ball(SeatId(5)), Some((0.0, 0.2)));
    }

    #[test]
    fn pedal_clamps_and_checks_seat() {
        let cycle = generate_assignment(8, 3).unwrap();
        let balls = BallState::neutral(8, 0.2);
        let next = apply_pedal(&balls, &cycle, PedalInput { seat: SeatId(2), position: 3.5 }).unwrap();
        let target = cycle.target_of(SeatId(2)).unwrap();
        assert_eq!(next.size[target.index()], 1.0);
        assert_eq!(
            apply_pedal(&balls, &cycle, PedalInput { seat: SeatId(8), position: 0.1 }),
            Err(Error::UnknownSeat(SeatId(8)))
        );
    }

    #[test]
    fn last_pedal_write_wins() {
        let cycle = generate_assignment(8, 9).unwrap();
        let balls = BallState::neutral(8, 0.2);
        let a = apply_pedal(&balls, &cycle, PedalInput { seat: SeatId(1), position: 0.9 }).unwrap();
        let b = apply_pedal(&a, &cycle, PedalInput { seat: SeatId(1), position: 0.3 }).unwrap();
        let target = cycle.target_of(SeatId(1)).unwrap();
        assert_eq!(b.size[target.index()], 0.3);
    }
}
