use std::fmt;
use std::num::NonZeroU64;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Methods of the Cortex API subset this bridge speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    Authorize,
    QueryHeadsets,
    CreateSession,
    Subscribe,
    QueryProfile,
    SetupProfile,
    Training,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Authorize,
        Method::QueryHeadsets,
        Method::CreateSession,
        Method::Subscribe,
        Method::QueryProfile,
        Method::SetupProfile,
        Method::Training,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Authorize => "authorize",
            Method::QueryHeadsets => "queryHeadsets",
            Method::CreateSession => "createSession",
            Method::Subscribe => "subscribe",
            Method::QueryProfile => "queryProfile",
            Method::SetupProfile => "setupProfile",
            Method::Training => "training",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcRequest {
    pub id: NonZeroU64,
    pub method: Method,
    pub params: Map<String, Value>,
}

impl RpcRequest {
    pub fn new(id: NonZeroU64, method: Method, params: Map<String, Value>) -> Self {
        Self { id, method, params }
    }

    /// Builds a request from a `json!({...})` literal. Non-object values
    /// produce empty params.
    pub fn with_params(id: NonZeroU64, method: Method, params: Value) -> Self {
        let params = match params {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        Self { id, method, params }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpcErrorObject {
    pub code: i64,
    pub message: String,
}

impl fmt::Display for RpcErrorObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (code {})", self.message, self.code)
    }
}

/// A JSON-RPC response. Exactly one of result/error is present, which the
/// `Result` encodes directly.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcResponse {
    pub id: u64,
    pub outcome: Result<Value, RpcErrorObject>,
}

impl RpcResponse {
    pub fn ok(id: u64, result: Value) -> Self {
        Self { id, outcome: Ok(result) }
    }

    pub fn err(id: u64, code: i64, message: impl Into<String>) -> Self {
        Self {
            id,
            outcome: Err(RpcErrorObject { code, message: message.into() }),
        }
    }

    pub fn result(&self) -> Option<&Value> {
        self.outcome.as_ref().ok()
    }
}

/// One sample of the `com` (mental command) stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub sid: String,
    pub time: f64,
    pub action: String,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub code: i64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Response(RpcResponse),
    Stream(StreamEvent),
    Warning(Warning),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unrecognised frame shape: {0}")]
    UnknownShape(String),
    #[error("stream power {0} outside [0, 1]")]
    OutOfRange(String),
}

#[derive(Serialize)]
struct RequestFrame<'a> {
    jsonrpc: &'static str,
    id: u64,
    method: Method,
    params: &'a Map<String, Value>,
}

pub fn encode_request(req: &RpcRequest) -> String {
    let frame = RequestFrame {
        jsonrpc: "2.0",
        id: req.id.get(),
        method: req.method,
        params: &req.params,
    };
    serde_json::to_string(&frame).expect("request frames always serialize")
}

#[derive(Serialize)]
struct ResultFrame<'a> {
    jsonrpc: &'static str,
    id: u64,
    result: &'a Value,
}

#[derive(Serialize)]
struct ErrorFrame<'a> {
    jsonrpc: &'static str,
    id: u64,
    error: &'a RpcErrorObject,
}

pub fn encode_response(resp: &RpcResponse) -> String {
    let text = match &resp.outcome {
        Ok(result) => serde_json::to_string(&ResultFrame { jsonrpc: "2.0", id: resp.id, result }),
        Err(error) => serde_json::to_string(&ErrorFrame { jsonrpc: "2.0", id: resp.id, error }),
    };
    text.expect("response frames always serialize")
}

pub fn encode_stream_event(ev: &StreamEvent) -> String {
    json!({ "sid": ev.sid, "time": ev.time, "com": [ev.action, ev.power] }).to_string()
}

pub fn encode_warning(w: &Warning) -> String {
    json!({ "warning": { "code": w.code, "message": w.message } }).to_string()
}

pub fn decode_message(frame: &[u8]) -> Result<Inbound, DecodeError> {
    let value: Value =
        serde_json::from_slice(frame).map_err(|e| DecodeError::MalformedFrame(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(DecodeError::UnknownShape("top level is not an object".into()));
    };

    if obj.contains_key("sid") && obj.contains_key("com") {
        decode_stream(&obj).map(Inbound::Stream)
    } else if let Some(id) = obj.get("id") {
        decode_response(id, &obj).map(Inbound::Response)
    } else if let Some(w) = obj.get("warning") {
        decode_warning(w).map(Inbound::Warning)
    } else {
        Err(DecodeError::UnknownShape(
            "neither a response nor a stream event".into(),
        ))
    }
}

/// Server-side decoding of a client request frame.
pub fn decode_request(frame: &[u8]) -> Result<RpcRequest, DecodeError> {
    let value: Value =
        serde_json::from_slice(frame).map_err(|e| DecodeError::MalformedFrame(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(shape("top level is not an object"));
    };
    let id = obj
        .get("id")
        .and_then(Value::as_u64)
        .and_then(NonZeroU64::new)
        .ok_or_else(|| shape("request id must be a positive integer"))?;
    let method = obj
        .get("method")
        .and_then(Value::as_str)
        .ok_or_else(|| shape("request method missing"))?;
    let method = Method::parse(method).ok_or_else(|| shape(&format!("unknown method {method}")))?;
    let params = match obj.remove("params") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(map)) => map,
        Some(_) => return Err(shape("params must be an object")),
    };
    Ok(RpcRequest { id, method, params })
}

fn shape(msg: &str) -> DecodeError {
    DecodeError::UnknownShape(msg.to_string())
}

fn decode_stream(obj: &Map<String, Value>) -> Result<StreamEvent, DecodeError> {
    let sid = obj["sid"].as_str().ok_or_else(|| shape("sid is not a string"))?;
    let time = obj
        .get("time")
        .and_then(Value::as_f64)
        .filter(|t| t.is_finite())
        .ok_or_else(|| shape("time is missing or not a number"))?;
    let com = obj["com"].as_array().ok_or_else(|| shape("com is not an array"))?;
    let [action, power] = com.as_slice() else {
        return Err(shape("com must be [action, power]"));
    };
    let action = action.as_str().ok_or_else(|| shape("com action is not a string"))?;
    let power = power.as_f64().ok_or_else(|| shape("com power is not a number"))?;
    if !(0.0..=1.0).contains(&power) {
        return Err(DecodeError::OutOfRange(power.to_string()));
    }
    Ok(StreamEvent {
        sid: sid.to_string(),
        time,
        action: action.to_string(),
        power,
    })
}

fn decode_response(id: &Value, obj: &Map<String, Value>) -> Result<RpcResponse, DecodeError> {
    let id = id.as_u64().ok_or_else(|| shape("id is not a non-negative integer"))?;
    let outcome = match (obj.get("result"), obj.get("error")) {
        (Some(result), None) => Ok(result.clone()),
        (None, Some(error)) => Err(serde_json::from_value::<RpcErrorObject>(error.clone())
            .map_err(|_| shape("error must be {code, message}"))?),
        (Some(_), Some(_)) => return Err(shape("response carries both result and error")),
        (None, None) => return Err(shape("response carries neither result nor error")),
    };
    Ok(RpcResponse { id, outcome })
}

fn decode_warning(w: &Value) -> Result<Warning, DecodeError> {
    let code = w.get("code").and_then(Value::as_i64);
    let message = w.get("message").and_then(Value::as_str);
    match (code, message) {
        (Some(code), Some(message)) => Ok(Warning { code, message: message.to_string() }),
        _ => Err(shape("warning must be {code, message}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(n: u64) -> NonZeroU64 {
        NonZeroU64::new(n).unwrap()
    }

    #[test]
    fn authorize_encodes_exactly() {
        let req = RpcRequest::new(id(1), Method::Authorize, Map::new());
        assert_eq!(
            encode_request(&req),
            r#"{"jsonrpc":"2.0","id":1,"method":"authorize","params":{}}"#
        );
    }

    #[test]
    fn subscribe_params_carry_streams() {
        let req = RpcRequest::with_params(
            id(3),
            Method::Subscribe,
            json!({ "session": "s-1", "streams": ["com"] }),
        );
        let text = encode_request(&req);
        assert!(text.contains(r#""streams":["com"]"#), "{text}");
        assert!(text.starts_with(r#"{"jsonrpc":"2.0","id":3,"method":"subscribe","params":"#));
    }

    #[test]
    fn create_session_params_carry_status() {
        let req = RpcRequest::with_params(
            id(2),
            Method::CreateSession,
            json!({ "headset": "SIM-0001", "status": "open" }),
        );
        assert!(encode_request(&req).contains(r#""status":"open""#));
    }

    #[test]
    fn decodes_stream_event() {
        let got = decode_message(br#"{"sid":"s-1","time":12.5,"com":["push",0.85]}"#).unwrap();
        assert_eq!(
            got,
            Inbound::Stream(StreamEvent {
                sid: "s-1".into(),
                time: 12.5,
                action: "push".into(),
                power: 0.85,
            })
        );
    }

    #[test]
    fn decodes_result_response() {
        let got = decode_message(br#"{"jsonrpc":"2.0","id":1,"result":{"cortexToken":"tok"}}"#)
            .unwrap();
        assert_eq!(got, Inbound::Response(RpcResponse::ok(1, json!({"cortexToken": "tok"}))));
    }

    #[test]
    fn decodes_error_response() {
        let got = decode_message(
            br#"{"jsonrpc":"2.0","id":4,"error":{"code":-32001,"message":"no headset"}}"#,
        )
        .unwrap();
        assert_eq!(got, Inbound::Response(RpcResponse::err(4, -32001, "no headset")));
    }

    #[test]
    fn power_above_one_is_out_of_range() {
        let err = decode_message(br#"{"sid":"s-1","time":1.0,"com":["push",1.7]}"#).unwrap_err();
        assert!(matches!(err, DecodeError::OutOfRange(_)));
        let err = decode_message(br#"{"sid":"s-1","time":1.0,"com":["push",-0.1]}"#).unwrap_err();
        assert!(matches!(err, DecodeError::OutOfRange(_)));
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(matches!(decode_message(b"{nope"), Err(DecodeError::MalformedFrame(_))));
        assert!(matches!(decode_message(b"[1,2]"), Err(DecodeError::UnknownShape(_))));
        assert!(matches!(decode_message(br#"{"foo":1}"#), Err(DecodeError::UnknownShape(_))));
        assert!(matches!(
            decode_message(br#"{"id":1,"result":1,"error":{"code":1,"message":"x"}}"#),
            Err(DecodeError::UnknownShape(_))
        ));
        assert!(matches!(decode_message(br#"{"id":1}"#), Err(DecodeError::UnknownShape(_))));
        assert!(matches!(
            decode_message(br#"{"sid":"s","time":1,"com":["push"]}"#),
            Err(DecodeError::UnknownShape(_))
        ));
        assert!(matches!(decode_message(&[0xff, 0xfe]), Err(DecodeError::MalformedFrame(_))));
    }

    #[test]
    fn warning_frames_decode() {
        let w = Warning { code: 1, message: "session closed".into() };
        assert_eq!(decode_message(encode_warning(&w).as_bytes()).unwrap(), Inbound::Warning(w));
    }

    fn arb_method() -> impl Strategy<Value = Method> {
        prop::sample::select(Method::ALL.to_vec())
    }

    fn arb_json() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::from),
            any::<i32>().prop_map(Value::from),
            "[a-z]{0,6}".prop_map(Value::from),
        ];
        leaf.prop_recursive(3, 16, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
                prop::collection::btree_map("[a-z]{1,4}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn requests_never_decode_as_stream_events(
            n in 1u64..u64::MAX,
            method in arb_method(),
            params in prop::collection::btree_map("[a-z]{1,5}", arb_json(), 0..4),
        ) {
            let req = RpcRequest::new(id(n), method, params.into_iter().collect());
            let decoded = decode_message(encode_request(&req).as_bytes());
            prop_assert!(!matches!(decoded, Ok(Inbound::Stream(_))));
        }

        #[test]
        fn responses_round_trip(
            n in any::<u64>(),
            ok in any::<bool>(),
            result in arb_json(),
            code in any::<i32>(),
            message in ".{0,12}",
        ) {
            let resp = if ok {
                RpcResponse::ok(n, result)
            } else {
                RpcResponse::err(n, code.into(), message)
            };
            let text = encode_response(&resp);
            prop_assert_eq!(decode_message(text.as_bytes()).unwrap(), Inbound::Response(resp));
        }

        #[test]
        fn stream_events_round_trip(
            sid in "[a-z0-9-]{1,8}",
            time in 0.0f64..1.0e6,
            action in "[a-z]{1,8}",
            power in 0.0f64..=1.0,
        ) {
            let ev = StreamEvent { sid, time, action, power };
            let text = encode_stream_event(&ev);
            prop_assert_eq!(decode_message(text.as_bytes()).unwrap(), Inbound::Stream(ev));
        }

        #[test]
        fn requests_round_trip_server_side(
            n in 1u64..u64::MAX,
            method in arb_method(),
            params in prop::collection::btree_map("[a-z]{1,5}", arb_json(), 0..4),
        ) {
            let req = RpcRequest::new(id(n), method, params.into_iter().collect());
            prop_assert_eq!(decode_request(encode_request(&req).as_bytes()).unwrap(), req);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_message(&bytes);
            let _ = decode_request(&bytes);
        }
    }
}
