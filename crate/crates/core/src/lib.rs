//! Bridge from a mental-command classification stream to keystrokes.
//!
//! - [`protocol`]: Cortex-style JSON-RPC codec and client handshake.
//! - [`client`]: WebSocket transport driving the handshake.
//! - [`engine`]: ten-sample evidence window, threshold rule, edge-triggered
//!   emitter and key sinks.
//! - [`simulator`]: scripted scenarios, mock headset server, threshold sweeps.
//! - [`daemon`]: profiles, session lifecycle, status fan-out and the HTTP
//!   control API.

pub mod client;
pub mod daemon;
pub mod engine;
pub mod protocol;
pub mod simulator;
