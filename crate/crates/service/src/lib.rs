//! Mentor session service: a JSON frame protocol over WebSocket that lets a
//! remote client answer an agent's deferrals, plus a plain HTTP snapshot
//! endpoint for polling clients.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Frame, ServerMessage, Snapshot, StartParams};
pub use server::{serve, ServerConfig};
pub use session::Session;
