use std::fmt;
use std::num::NonZeroU64;

use serde_json::{json, Value};
use thiserror::Error;

use super::codec::{Method, RpcErrorObject, RpcRequest, RpcResponse};
use super::COM_STREAM;

/// Position of a connection in the client handshake. Each phase names what
/// has been completed; the request for the next step is outstanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HandshakePhase {
    Disconnected,
    Connected,
    Authorized,
    HeadsetKnown,
    SessionOpen,
    ProfileLoaded,
    Subscribed,
}

impl HandshakePhase {
    pub const ALL: [HandshakePhase; 7] = [
        HandshakePhase::Disconnected,
        HandshakePhase::Connected,
        HandshakePhase::Authorized,
        HandshakePhase::HeadsetKnown,
        HandshakePhase::SessionOpen,
        HandshakePhase::ProfileLoaded,
        HandshakePhase::Subscribed,
    ];
}

impl fmt::Display for HandshakePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HandshakeInput {
    /// The transport finished connecting.
    Connected,
    Response(RpcResponse),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolViolation {
    #[error("{method} failed: {error}")]
    ErrorResponse { method: Method, error: RpcErrorObject },
    #[error("response id {got} does not match outstanding request {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("unexpected {input} while {phase}")]
    Unexpected { phase: HandshakePhase, input: &'static str },
    #[error("{method} returned an unusable result: {detail}")]
    BadResult { method: Method, detail: String },
}

/// Client side of the connect → subscribe handshake for one connection.
///
/// Sequence: authorize, queryHeadsets, createSession, setupProfile (load),
/// subscribe. Any error response, id mismatch or out-of-order input drops
/// the machine back to `Disconnected`.
#[derive(Debug, Clone)]
pub struct Handshake {
    phase: HandshakePhase,
    profile: String,
    last_id: u64,
    outstanding: Option<(u64, Method)>,
    token: Option<String>,
    headset: Option<String>,
    session: Option<String>,
}

impl Handshake {
    pub fn new(profile: impl Into<String>) -> Self {
        Self {
            phase: HandshakePhase::Disconnected,
            profile: profile.into(),
            last_id: 0,
            outstanding: None,
            token: None,
            headset: None,
            session: None,
        }
    }

    pub fn phase(&self) -> HandshakePhase {
        self.phase
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn headset(&self) -> Option<&str> {
        self.headset.as_deref()
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    /// Id of the last request issued on this connection.
    pub fn last_request_id(&self) -> u64 {
        self.last_id
    }

    /// Feeds one input and returns the next request to send, if any.
    pub fn advance(&mut self, input: HandshakeInput) -> Result<Option<RpcRequest>, ProtocolViolation> {
        let result = self.step(input);
        if result.is_err() {
            self.reset();
        }
        result
    }

    fn reset(&mut self) {
        self.phase = HandshakePhase::Disconnected;
        self.outstanding = None;
        self.token = None;
        self.headset = None;
        self.session = None;
    }

    fn step(&mut self, input: HandshakeInput) -> Result<Option<RpcRequest>, ProtocolViolation> {
        let resp = match input {
            HandshakeInput::Connected if self.phase == HandshakePhase::Disconnected => {
                self.phase = HandshakePhase::Connected;
                return Ok(Some(self.issue(Method::Authorize, json!({}))));
            }
            HandshakeInput::Connected => {
                return Err(ProtocolViolation::Unexpected {
                    phase: self.phase,
                    input: "connect signal",
                })
            }
            HandshakeInput::Response(resp) => resp,
        };

        let Some((expected, method)) = self.outstanding else {
            return Err(ProtocolViolation::Unexpected {
                phase: self.phase,
                input: "response",
            });
        };
        if resp.id != expected {
            return Err(ProtocolViolation::IdMismatch { expected, got: resp.id });
        }
        self.outstanding = None;
        let result = match resp.outcome {
            Ok(v) => v,
            Err(error) => return Err(ProtocolViolation::ErrorResponse { method, error }),
        };
        let bad = |detail: &str| ProtocolViolation::BadResult {
            method,
            detail: detail.to_string(),
        };

        match method {
            Method::Authorize => {
                let token = result
                    .get("cortexToken")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("missing cortexToken"))?;
                self.token = Some(token.to_string());
                self.phase = HandshakePhase::Authorized;
                Ok(Some(self.issue(Method::QueryHeadsets, json!({}))))
            }
            Method::QueryHeadsets => {
                let headset = result
                    .as_array()
                    .and_then(|hs| hs.first())
                    .and_then(|h| h.get("id"))
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("no headset available"))?;
                self.headset = Some(headset.to_string());
                self.phase = HandshakePhase::HeadsetKnown;
                let params = json!({
                    "cortexToken": self.token,
                    "headset": headset,
                    "status": "open",
                });
                Ok(Some(self.issue(Method::CreateSession, params)))
            }
            Method::CreateSession => {
                let session = result
                    .get("id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("missing session id"))?;
                self.session = Some(session.to_string());
                self.phase = HandshakePhase::SessionOpen;
                let params = json!({
                    "cortexToken": self.token,
                    "headset": self.headset,
                    "profile": self.profile,
                    "status": "load",
                });
                Ok(Some(self.issue(Method::SetupProfile, params)))
            }
            Method::SetupProfile => {
                self.phase = HandshakePhase::ProfileLoaded;
                let params = json!({
                    "cortexToken": self.token,
                    "session": self.session,
                    "streams": [COM_STREAM],
                });
                Ok(Some(self.issue(Method::Subscribe, params)))
            }
            Method::Subscribe => {
                let subscribed = result
                    .get("success")
                    .and_then(Value::as_array)
                    .is_some_and(|s| {
                        s.iter().any(|e| e.get("streamName").and_then(Value::as_str) == Some(COM_STREAM))
                    });
                if !subscribed {
                    return Err(bad("com stream not in subscription success list"));
                }
                self.phase = HandshakePhase::Subscribed;
                Ok(None)
            }
            other => Err(bad(&format!("{other} is not part of the handshake"))),
        }
    }

    fn issue(&mut self, method: Method, params: Value) -> RpcRequest {
        self.last_id += 1;
        self.outstanding = Some((self.last_id, method));
        let id = NonZeroU64::new(self.last_id).expect("ids start at 1");
        RpcRequest::with_params(id, method, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::encode_request;

    fn ok(id: u64, v: Value) -> HandshakeInput {
        HandshakeInput::Response(RpcResponse::ok(id, v))
    }

    /// Scripted server replies for each handshake method.
    fn reply_for(req: &RpcRequest) -> HandshakeInput {
        let id = req.id.get();
        match req.method {
            Method::Authorize => ok(id, json!({"cortexToken": "tok"})),
            Method::QueryHeadsets => ok(id, json!([{"id": "SIM-0001", "status": "connected"}])),
            Method::CreateSession => ok(id, json!({"id": "s-1", "status": "opened"})),
            Method::SetupProfile => ok(id, json!({"action": "load", "name": "alex"})),
            Method::Subscribe => ok(
                id,
                json!({"success": [{"streamName": "com", "cols": ["act", "pow"], "sid": "s-1"}], "failure": []}),
            ),
            _ => unreachable!(),
        }
    }

    fn drive_to(target: HandshakePhase) -> (Handshake, Option<RpcRequest>) {
        let mut hs = Handshake::new("alex");
        if target == HandshakePhase::Disconnected {
            return (hs, None);
        }
        let mut pending = hs.advance(HandshakeInput::Connected).unwrap();
        while hs.phase() != target {
            let req = pending.take().expect("request outstanding");
            pending = hs.advance(reply_for(&req)).unwrap();
        }
        (hs, pending)
    }

    #[test]
    fn connect_issues_authorize() {
        let mut hs = Handshake::new("alex");
        let req = hs.advance(HandshakeInput::Connected).unwrap().unwrap();
        assert_eq!(hs.phase(), HandshakePhase::Connected);
        assert_eq!(req.method, Method::Authorize);
        assert_eq!(
            encode_request(&req),
            r#"{"jsonrpc":"2.0","id":1,"method":"authorize","params":{}}"#
        );
    }

    #[test]
    fn session_open_issues_profile_load_then_subscribe() {
        let (hs, req) = drive_to(HandshakePhase::HeadsetKnown);
        let mut hs = hs;
        let req = req.unwrap();
        assert_eq!(req.method, Method::CreateSession);
        let next = hs.advance(reply_for(&req)).unwrap().unwrap();
        assert_eq!(hs.phase(), HandshakePhase::SessionOpen);
        assert_eq!(hs.session(), Some("s-1"));
        assert_eq!(next.method, Method::SetupProfile);
        let sub = hs.advance(reply_for(&next)).unwrap().unwrap();
        assert_eq!(sub.method, Method::Subscribe);
        assert_eq!(sub.params["session"], json!("s-1"));
        assert_eq!(sub.params["streams"], json!(["com"]));
    }

    #[test]
    fn error_response_disconnects() {
        let (mut hs, req) = drive_to(HandshakePhase::Authorized);
        let req = req.unwrap();
        let err = hs
            .advance(HandshakeInput::Response(RpcResponse::err(req.id.get(), -32001, "no headset")))
            .unwrap_err();
        assert_eq!(hs.phase(), HandshakePhase::Disconnected);
        assert!(matches!(err, ProtocolViolation::ErrorResponse { .. }));
        assert!(err.to_string().contains("no headset"));
    }

    #[test]
    fn id_mismatch_disconnects() {
        let (mut hs, _) = drive_to(HandshakePhase::Connected);
        let err = hs.advance(ok(99, json!({"cortexToken": "t"}))).unwrap_err();
        assert_eq!(err, ProtocolViolation::IdMismatch { expected: 1, got: 99 });
        assert_eq!(hs.phase(), HandshakePhase::Disconnected);
    }

    #[test]
    fn clean_path_emits_five_requests() {
        let mut hs = Handshake::new("alex");
        let mut sent = Vec::new();
        let mut next = hs.advance(HandshakeInput::Connected).unwrap();
        while let Some(req) = next {
            next = hs.advance(reply_for(&req)).unwrap();
            sent.push(req.method);
        }
        assert_eq!(hs.phase(), HandshakePhase::Subscribed);
        assert_eq!(hs.last_request_id(), 5);
        assert_eq!(
            sent,
            [
                Method::Authorize,
                Method::QueryHeadsets,
                Method::CreateSession,
                Method::SetupProfile,
                Method::Subscribe
            ]
        );
    }

    #[test]
    fn empty_headset_list_is_a_violation() {
        let (mut hs, req) = drive_to(HandshakePhase::Authorized);
        let err = hs.advance(ok(req.unwrap().id.get(), json!([]))).unwrap_err();
        assert!(matches!(err, ProtocolViolation::BadResult { .. }));
    }

    #[test]
    fn every_phase_input_pair_is_defined() {
        let inputs = [
            HandshakeInput::Connected,
            ok(1, json!({})),
            HandshakeInput::Response(RpcResponse::err(1, -1, "x")),
        ];
        for target in HandshakePhase::ALL {
            for input in &inputs {
                let (mut hs, _) = drive_to(target);
                let before = hs.phase();
                match hs.advance(input.clone()) {
                    Ok(_) => assert!(hs.phase() > before),
                    Err(_) => assert_eq!(hs.phase(), HandshakePhase::Disconnected),
                }
            }
        }
    }
}
