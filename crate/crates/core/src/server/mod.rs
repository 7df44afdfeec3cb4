//! Session orchestration over a bidirectional message channel.
//!
//! Messages are [`ProtocolMessage`]s framed as newline-delimited JSON. A
//! [`Session`] sequences accepted messages into events, applies them, appends
//! them to the log and computes role-targeted outbound messages with
//! [`route_outbound`]. The [`Hub`] tracks connections and their roles across
//! sessions; network transports live with the binary.

pub mod hub;
pub mod protocol;
pub mod route;
pub mod session;

pub use hub::{ConnId, Delivery, Hub};
pub use protocol::{ClientRole, JoinRequest, MessageType, Origin, ProtocolMessage};
pub use route::{route_outbound, DotUpdate, Outbound, StateView};
pub use session::{Accepted, Rejection, Session};

/// Environment variable naming the default log directory for `serve`.
pub const LOG_DIR_ENV: &str = "FEEDBACK_LOOM_LOG_DIR";
