//! Listening-channel routing for the multi-seat headset apparatus.
//!
//! Each seat's microphone broadcasts on its own channel (channel id = seat
//! id) and each seat's headset is tuned to exactly one channel. A speaker is
//! never told how many seats are tuned to them; only analysis consumers get
//! [`listeners_of`] and [`mutual_pairs`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seat::SeatId;

pub type ChannelId = SeatId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingState {
    /// `listen[i]` is the channel seat `i` is tuned to.
    pub listen: Vec<ChannelId>,
    /// Headset "system on" indicator.
    pub powered: Vec<bool>,
}

impl RoutingState {
    /// Every seat starts tuned to its own channel.
    pub fn identity(n_seats: u32) -> Self {
        RoutingState { listen: (0..n_seats).map(SeatId).collect(), powered: vec![false; n_seats as usize] }
    }

    pub fn n_seats(&self) -> u32 {
        self.listen.len() as u32
    }

    fn check_seat(&self, seat: SeatId) -> Result<()> {
        if seat.index() < self.listen.len() {
            Ok(())
        } else {
            Err(Error::UnknownSeat(seat))
        }
    }

    pub fn set_powered(&mut self, on: bool) {
        self.powered.iter_mut().for_each(|p| *p = on);
    }
}

pub fn set_listen(state: &RoutingState, seat: SeatId, channel: ChannelId) -> Result<RoutingState> {
    state.check_seat(seat)?;
    if channel.index() >= state.listen.len() {
        return Err(Error::UnknownChannel(channel.0));
    }
    let mut next = state.clone();
    next.listen[seat.index()] = channel;
    Ok(next)
}

/// The seat whose channel `listener` currently hears.
pub fn audible_speaker(state: &RoutingState, listener: SeatId) -> Result<SeatId> {
    state.check_seat(listener)?;
    Ok(state.listen[listener.index()])
}

/// Analysis only: every seat tuned to `speaker`'s channel.
pub fn listeners_of(state: &RoutingState, speaker: SeatId) -> Result<BTreeSet<SeatId>> {
    state.check_seat(speaker)?;
    Ok(state.listen.iter().enumerate().filter(|(_, &ch)| ch == speaker).map(|(i, _)| SeatId(i as u32)).collect())
}

/// Analysis only: unordered pairs of distinct seats tuned to each other.
pub fn mutual_pairs(state: &RoutingState) -> BTreeSet<(SeatId, SeatId)> {
    state
        .listen
        .iter()
        .enumerate()
        .filter_map(|(i, &j)| {
            let i = SeatId(i as u32);
            (i < j && state.listen[j.index()] == i).then_some((i, j))
        })
        .collect()
}

/// What a seat's own switchbox shows: nothing derived from other seats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerView {
    pub seat: SeatId,
    pub own_channel: ChannelId,
    pub tuned_to: ChannelId,
    pub powered: bool,
}

pub fn speaker_view(state: &RoutingState, seat: SeatId) -> Result<SpeakerView> {
    state.check_seat(seat)?;
    Ok(SpeakerView {
        seat,
        own_channel: seat,
        tuned_to: state.listen[seat.index()],
        powered: state.powered[seat.index()],
    })
}

/// A `(speaker, listener)` edge: `listener` heard `speaker` during a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeardEdge {
    pub speaker: SeatId,
    pub listener: SeatId,
}

/// Who heard whom, given which seats spoke during a tick. Self-monitoring
/// edges are included.
pub fn heard_edges(state: &RoutingState, speaking: &[bool]) -> Vec<HeardEdge> {
    state
        .listen
        .iter()
        .enumerate()
        .filter(|(i, &ch)| state.powered[*i] && speaking.get(ch.index()).copied().unwrap_or(false))
        .map(|(i, &ch)| HeardEdge { speaker: ch, listener: SeatId(i as u32) })
        .collect()
}
