//! # feedback-loom
//!
//! Engines and session machinery for instrumenting live group conversations
//! with immediate feedback channels.
//!
//! Four session modes share one event-sourced core:
//!
//! | Mode | Engine | Feedback surface |
//! |------|--------|------------------|
//! | `Reflect` | [`reflect`] | territory cells apportioned by smoothed speaking activity |
//! | `Simulation` | [`routing`] | each seat tunes one listening channel; listener counts stay hidden |
//! | `Tic` | [`tic`] | pedals drive another seat's ball along a constrained evaluator cycle |
//! | `VcFeedback` | [`vc`] | slider-driven colored dot in a participant's self panel |
//!
//! Every state change is an [`EventRecord`] appended to a JSONL log; the
//! [`SessionState`] is a pure fold over that log, so any recorded session can
//! be replayed byte-for-byte ([`eventlog::replay`]). The [`agents`] module
//! drives scripted participants through the same pipeline for desk-scale
//! experiments, and [`metrics`] turns logs and coder annotations into
//! participation and extremity reports.
//!
//! The [`server`] module holds the transport-independent protocol handling:
//! sequencing, phase gating, engine dispatch and role-targeted fan-out.

pub mod agents;
pub mod config;
pub mod error;
pub mod event;
pub mod eventlog;
pub mod metrics;
pub mod phase;
pub mod reflect;
pub mod routing;
pub mod seat;
pub mod server;
pub mod session;
pub mod tic;
pub mod vc;

pub use config::{validate_config, DotVisibility, FeedbackSourcePolicy, Mode, PhaseSpan, SessionConfig, Violation};
pub use error::{Error, Result};
pub use event::{Event, EventRecord};
pub use phase::SessionPhase;
pub use seat::SeatId;
pub use session::{EngineState, ParticipantProfile, SessionState};
