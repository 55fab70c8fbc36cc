//! Cortex-style JSON-RPC message subset spoken over WebSocket text frames.
//!
//! One JSON document per frame. Requests carry `jsonrpc`, `id`, `method`
//! and `params` in that order; inbound frames are either RPC responses
//! (keyed by `id`), `com` stream samples (keyed by `sid` + `com`) or
//! server warnings (keyed by `warning`).

mod codec;
mod handshake;

pub use codec::{
    decode_message, decode_request, encode_request, encode_response, encode_stream_event, encode_warning,
    DecodeError, Inbound, Method, RpcErrorObject, RpcRequest, RpcResponse, StreamEvent, Warning,
};
pub use handshake::{Handshake, HandshakeInput, HandshakePhase, ProtocolViolation};

/// Port the Cortex service listens on by default.
pub const DEFAULT_PORT: u16 = 6868;

/// The only stream this bridge subscribes to.
pub const COM_STREAM: &str = "com";

/// Warning code sent by the server when it closes a session.
pub const WARNING_SESSION_CLOSED: i64 = 1;
