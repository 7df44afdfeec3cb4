use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a seating position on the table ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeatId(pub u32);

impl SeatId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Letter label used for the eight-seat table (A..H); falls back to the index.
    pub fn label(self) -> String {
        if self.0 < 26 {
            char::from(b'A' + self.0 as u8).to_string()
        } else {
            self.0.to_string()
        }
    }
}

impl fmt::Display for SeatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for SeatId {
    fn from(value: u32) -> Self {
        SeatId(value)
    }
}

/// Seats arranged on a closed ring of `n` positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    n: u32,
}

impl Ring {
    pub fn new(n: u32) -> Self {
        Ring { n }
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn contains(&self, seat: SeatId) -> bool {
        seat.0 < self.n
    }

    pub fn seats(&self) -> impl Iterator<Item = SeatId> {
        (0..self.n).map(SeatId)
    }

    pub fn left(&self, seat: SeatId) -> SeatId {
        SeatId((seat.0 + self.n - 1) % self.n)
    }

    pub fn right(&self, seat: SeatId) -> SeatId {
        SeatId((seat.0 + 1) % self.n)
    }

    pub fn are_neighbors(&self, a: SeatId, b: SeatId) -> bool {
        a != b && (self.left(a) == b || self.right(a) == b)
    }

    /// The seat facing `seat` across the table. Only defined for an even ring.
    pub fn opposite(&self, seat: SeatId) -> Option<SeatId> {
        if self.n.is_multiple_of(2) {
            Some(SeatId((seat.0 + self.n / 2) % self.n))
        } else {
            None
        }
    }
}
