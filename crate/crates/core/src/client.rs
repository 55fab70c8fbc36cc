//! WebSocket client for a Cortex-style service.

use std::num::NonZeroU64;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::protocol::{
    decode_message, encode_request, DecodeError, Handshake, HandshakeInput, Inbound, Method,
    ProtocolViolation, RpcErrorObject, RpcRequest,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("connection closed by server")]
    Closed,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Protocol(#[from] ProtocolViolation),
    #[error("{method} rejected: {error}")]
    Rejected { method: Method, error: RpcErrorObject },
}

impl From<tokio_tungstenite::tungstenite::Error> for ClientError {
    fn from(e: tokio_tungstenite::tungstenite::Error) -> Self {
        ClientError::Transport(e.to_string())
    }
}

/// Identifiers obtained by a completed handshake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub token: String,
    pub headset: String,
    pub session: String,
}

pub struct CortexClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    last_id: u64,
}

impl CortexClient {
    pub async fn connect(url: &str) -> Result<Self, ClientError> {
        let (ws, _) = tokio_tungstenite::connect_async_with_config(url, None, true).await?;
        Ok(Self { ws, last_id: 0 })
    }

    pub async fn send(&mut self, req: &RpcRequest) -> Result<(), ClientError> {
        self.last_id = self.last_id.max(req.id.get());
        self.ws.send(Message::text(encode_request(req))).await?;
        Ok(())
    }

    /// Next decoded frame, or `None` once the server closes the stream.
    /// Control and binary frames are skipped.
    pub async fn recv(&mut self) -> Result<Option<Inbound>, ClientError> {
        while let Some(msg) = self.ws.next().await {
            match msg? {
                Message::Text(text) => return Ok(Some(decode_message(text.as_bytes())?)),
                Message::Close(_) => return Ok(None),
                other => tracing::debug!(kind = ?other, "ignoring non-text frame"),
            }
        }
        Ok(None)
    }

    /// Sends one request and waits for its response. Stream events and
    /// warnings arriving meanwhile are dropped.
    pub async fn call(&mut self, method: Method, params: Value) -> Result<Value, ClientError> {
        let id = NonZeroU64::new(self.last_id + 1).expect("id counter overflow");
        self.send(&RpcRequest::with_params(id, method, params)).await?;
        loop {
            match self.recv().await? {
                None => return Err(ClientError::Closed),
                Some(Inbound::Response(resp)) if resp.id == id.get() => {
                    return resp.outcome.map_err(|error| ClientError::Rejected { method, error });
                }
                Some(other) => tracing::debug!(?other, "skipping frame while awaiting {method}"),
            }
        }
    }

    /// Runs authorize → queryHeadsets → createSession → setupProfile →
    /// subscribe, leaving the connection streaming `com` samples.
    pub async fn handshake(&mut self, profile: &str) -> Result<Subscription, ClientError> {
        let mut hs = Handshake::new(profile);
        let mut next = hs.advance(HandshakeInput::Connected)?;
        while let Some(req) = next {
            self.send(&req).await?;
            let resp = loop {
                match self.recv().await? {
                    None => return Err(ClientError::Closed),
                    Some(Inbound::Response(resp)) => break resp,
                    Some(other) => tracing::debug!(?other, "frame before subscription"),
                }
            };
            next = hs.advance(HandshakeInput::Response(resp))?;
        }
        self.last_id = hs.last_request_id();
        Ok(Subscription {
            token: hs.token().unwrap_or_default().to_string(),
            headset: hs.headset().unwrap_or_default().to_string(),
            session: hs.session().unwrap_or_default().to_string(),
        })
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

/// Trains `action` for `profile` on a transient connection and returns the
/// server's training result.
pub async fn train_action(url: &str, profile: &str, action: &str) -> Result<Value, ClientError> {
    let mut client = CortexClient::connect(url).await?;
    let auth = client.call(Method::Authorize, json!({})).await?;
    let token = auth.get("cortexToken").cloned().unwrap_or(Value::Null);
    let headsets = client.call(Method::QueryHeadsets, json!({})).await?;
    let headset = headsets
        .as_array()
        .and_then(|hs| hs.first())
        .and_then(|h| h.get("id"))
        .cloned()
        .ok_or_else(|| ClientError::Rejected {
            method: Method::QueryHeadsets,
            error: RpcErrorObject { code: 0, message: "no headset available".into() },
        })?;
    let session = client
        .call(
            Method::CreateSession,
            json!({ "cortexToken": token, "headset": headset, "status": "open" }),
        )
        .await?;
    client
        .call(
            Method::SetupProfile,
            json!({ "cortexToken": token, "headset": headset, "profile": profile, "status": "create" }),
        )
        .await?;
    let outcome = client
        .call(
            Method::Training,
            json!({
                "cortexToken": token,
                "session": session.get("id"),
                "detection": "mentalCommand",
                "action": action,
                "status": "start",
            }),
        )
        .await?;
    client.close().await;
    Ok(outcome)
}
