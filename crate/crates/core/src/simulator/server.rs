//! Mock Cortex-style headset service backed by a scripted scenario.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use super::scenario::{generate_stream, Scenario};
use super::SimError;
use crate::engine::LabeledSample;
use crate::protocol::{
    decode_request, encode_response, encode_stream_event, encode_warning, Method, RpcRequest,
    RpcResponse, StreamEvent, Warning, COM_STREAM, DEFAULT_PORT, WARNING_SESSION_CLOSED,
};

pub const SIM_HEADSET: &str = "SIM-0001";
pub const SIM_TOKEN: &str = "sim-token";

/// Simulated duration of a training round.
pub const DEFAULT_TRAINING_DELAY: Duration = Duration::from_secs(8);

pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const INVALID_TOKEN: i64 = -32014;
    pub const HEADSET_UNAVAILABLE: i64 = -32004;
    pub const SESSION_NOT_FOUND: i64 = -32005;
    pub const ALREADY_SUBSCRIBED: i64 = -32016;
    pub const BAD_PARAMS: i64 = -32602;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointConfig {
    pub host: String,
    pub port: u16,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: DEFAULT_PORT }
    }
}

impl EndpointConfig {
    /// Loopback on an OS-assigned port.
    pub fn ephemeral() -> Self {
        Self { host: "127.0.0.1".into(), port: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Push the whole stream as fast as the socket allows.
    Accelerated,
    /// Push each sample at its scenario timestamp on a monotonic clock.
    Paced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockFault {
    /// Drop the connection when a training request arrives.
    CloseDuringTraining,
}

#[derive(Debug, Clone)]
pub struct MockOptions {
    pub pacing: Pacing,
    pub training_delay: Duration,
    pub fault: Option<MockFault>,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            pacing: Pacing::Paced,
            training_delay: DEFAULT_TRAINING_DELAY,
            fault: None,
        }
    }
}

impl MockOptions {
    pub fn accelerated() -> Self {
        Self {
            pacing: Pacing::Accelerated,
            training_delay: Duration::ZERO,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToServer,
    ToClient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub connection: u64,
    pub direction: Direction,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript(Arc<Mutex<Vec<TranscriptEntry>>>);

impl Transcript {
    fn record(&self, connection: u64, direction: Direction, text: &str) {
        self.0.lock().expect("transcript poisoned").push(TranscriptEntry {
            connection,
            direction,
            text: text.to_string(),
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.0.lock().expect("transcript poisoned").clone()
    }

    /// Text of every frame the clients sent, in arrival order.
    pub fn client_frames(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|e| e.direction == Direction::ToServer)
            .map(|e| e.text)
            .collect()
    }
}

struct Shared {
    samples: Vec<LabeledSample>,
    options: MockOptions,
    sessions: AtomicU64,
    connections: AtomicU64,
    profiles: Mutex<BTreeSet<String>>,
    transcript: Transcript,
}

pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<()>,
    transcript: Transcript,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}/", self.addr)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Stops accepting, closes live connections and waits for the accept loop.
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        let _ = self.task.await;
    }
}

pub async fn run_mock_server(
    scenario: Scenario,
    endpoint: &EndpointConfig,
    options: MockOptions,
) -> Result<ServerHandle, SimError> {
    scenario.validate()?;
    let listener = TcpListener::bind((endpoint.host.as_str(), endpoint.port))
        .await
        .map_err(|e| SimError::Bind(format!("{}:{}: {e}", endpoint.host, endpoint.port)))?;
    let addr = listener.local_addr().map_err(|e| SimError::Bind(e.to_string()))?;
    let transcript = Transcript::default();
    let shared = Arc::new(Shared {
        samples: generate_stream(&scenario),
        options,
        sessions: AtomicU64::new(0),
        connections: AtomicU64::new(0),
        profiles: Mutex::new(BTreeSet::new()),
        transcript: transcript.clone(),
    });
    let (shutdown, shutdown_rx) = watch::channel(false);
    let task = tokio::spawn(accept_loop(listener, shared, shutdown_rx));
    tracing::info!(%addr, scenario = %scenario.name, "mock headset server listening");
    Ok(ServerHandle { addr, shutdown, task, transcript })
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>, mut shutdown: watch::Receiver<bool>) {
    let mut conns = Vec::new();
    loop {
        tokio::select! {
            _ = shutdown.changed() => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    tracing::debug!(%peer, "mock client connected");
                    conns.push(tokio::spawn(serve_connection(stream, shared.clone(), shutdown.clone())));
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
        }
    }
    for c in conns {
        let _ = c.await;
    }
}

struct Outbox {
    tx: mpsc::UnboundedSender<Message>,
    conn: u64,
    transcript: Transcript,
}

impl Outbox {
    fn text(&self, text: String) {
        self.transcript.record(self.conn, Direction::ToClient, &text);
        let _ = self.tx.send(Message::text(text));
    }

    fn respond(&self, resp: RpcResponse) {
        self.text(encode_response(&resp));
    }

    fn close(&self) {
        let _ = self.tx.send(Message::Close(None));
    }
}

impl Clone for Outbox {
    fn clone(&self) -> Self {
        Self { tx: self.tx.clone(), conn: self.conn, transcript: self.transcript.clone() }
    }
}

#[derive(Default)]
struct Connection {
    session: Option<String>,
    subscribed: bool,
    tasks: Vec<JoinHandle<()>>,
}

async fn serve_connection(stream: TcpStream, shared: Arc<Shared>, mut shutdown: watch::Receiver<bool>) {
    // Samples are tiny frames; without this, delayed ACKs hold some back ~40 ms.
    let _ = stream.set_nodelay(true);
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::warn!("websocket upgrade failed: {e}");
            return;
        }
    };
    let conn_id = shared.connections.fetch_add(1, Ordering::SeqCst) + 1;
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Message>();
    let writer = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            let closing = matches!(msg, Message::Close(_));
            if sink.send(msg).await.is_err() || closing {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let out = Outbox { tx, conn: conn_id, transcript: shared.transcript.clone() };
    let mut conn = Connection::default();

    loop {
        tokio::select! {
            _ = shutdown.changed() => {
                out.close();
                break;
            }
            msg = source.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    shared.transcript.record(conn_id, Direction::ToServer, &text);
                    if !handle_frame(text.as_bytes(), &shared, &out, &mut conn) {
                        out.close();
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    for t in conn.tasks {
        t.abort();
    }
    drop(out);
    let _ = writer.await;
}

/// Handles one client frame. Returns false when the connection must close.
fn handle_frame(frame: &[u8], shared: &Arc<Shared>, out: &Outbox, conn: &mut Connection) -> bool {
    let req = match decode_request(frame) {
        Ok(req) => req,
        Err(e) => {
            let code = match e {
                crate::protocol::DecodeError::MalformedFrame(_) => codes::PARSE_ERROR,
                _ => codes::INVALID_REQUEST,
            };
            out.respond(RpcResponse::err(0, code, e.to_string()));
            return true;
        }
    };
    let id = req.id.get();
    let param = |key: &str| req.params.get(key).and_then(Value::as_str);

    if req.method != Method::Authorize
        && req.method != Method::QueryHeadsets
        && param("cortexToken") != Some(SIM_TOKEN)
    {
        out.respond(RpcResponse::err(id, codes::INVALID_TOKEN, "invalid cortex token"));
        return true;
    }

    match req.method {
        Method::Authorize => out.respond(RpcResponse::ok(id, json!({ "cortexToken": SIM_TOKEN }))),
        Method::QueryHeadsets => out.respond(RpcResponse::ok(
            id,
            json!([{ "id": SIM_HEADSET, "status": "connected", "connectedBy": "dongle" }]),
        )),
        Method::CreateSession => {
            if param("headset") != Some(SIM_HEADSET) {
                out.respond(RpcResponse::err(id, codes::HEADSET_UNAVAILABLE, "headset unavailable"));
                return true;
            }
            let n = shared.sessions.fetch_add(1, Ordering::SeqCst) + 1;
            let sid = format!("s-{n}");
            conn.session = Some(sid.clone());
            conn.subscribed = false;
            out.respond(RpcResponse::ok(
                id,
                json!({ "id": sid, "status": "opened", "headset": { "id": SIM_HEADSET } }),
            ));
        }
        Method::SetupProfile => {
            let (Some(profile), Some(status)) = (param("profile"), param("status")) else {
                out.respond(RpcResponse::err(id, codes::BAD_PARAMS, "profile and status are required"));
                return true;
            };
            shared.profiles.lock().expect("profiles poisoned").insert(profile.to_string());
            out.respond(RpcResponse::ok(id, json!({ "action": status, "name": profile })));
        }
        Method::QueryProfile => {
            let names: Vec<Value> = shared
                .profiles
                .lock()
                .expect("profiles poisoned")
                .iter()
                .map(|n| json!({ "name": n }))
                .collect();
            out.respond(RpcResponse::ok(id, Value::Array(names)));
        }
        Method::Subscribe => return subscribe(&req, shared, out, conn),
        Method::Training => {
            if shared.options.fault == Some(MockFault::CloseDuringTraining) {
                return false;
            }
            let action = param("action").unwrap_or_default().to_string();
            let delay = shared.options.training_delay;
            let out = out.clone();
            conn.tasks.push(tokio::spawn(async move {
                tokio::time::sleep(delay).await;
                out.respond(RpcResponse::ok(id, json!({ "action": action, "status": "succeeded" })));
            }));
        }
    }
    true
}

fn subscribe(req: &RpcRequest, shared: &Arc<Shared>, out: &Outbox, conn: &mut Connection) -> bool {
    let id = req.id.get();
    let Some(sid) = conn.session.clone() else {
        out.respond(RpcResponse::err(id, codes::SESSION_NOT_FOUND, "no open session"));
        return true;
    };
    if req.params.get("session").and_then(Value::as_str) != Some(sid.as_str()) {
        out.respond(RpcResponse::err(id, codes::SESSION_NOT_FOUND, "session not found"));
        return true;
    }
    if conn.subscribed {
        out.respond(RpcResponse::err(id, codes::ALREADY_SUBSCRIBED, "already subscribed"));
        return true;
    }
    let streams: Vec<&str> = req
        .params
        .get("streams")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default();
    let success: Vec<Value> = streams
        .iter()
        .filter(|s| **s == COM_STREAM)
        .map(|_| json!({ "streamName": COM_STREAM, "cols": ["act", "pow"], "sid": sid }))
        .collect();
    let failure: Vec<Value> = streams
        .iter()
        .filter(|s| **s != COM_STREAM)
        .map(|s| json!({ "streamName": s, "code": -32016, "message": "stream unavailable" }))
        .collect();
    let subscribed = !success.is_empty();
    out.respond(RpcResponse::ok(id, json!({ "success": success, "failure": failure })));
    if subscribed {
        conn.subscribed = true;
        conn.tasks.push(tokio::spawn(push_stream(shared.clone(), out.clone(), sid)));
    }
    true
}

async fn push_stream(shared: Arc<Shared>, out: Outbox, sid: String) {
    let start = tokio::time::Instant::now();
    for sample in &shared.samples {
        if shared.options.pacing == Pacing::Paced {
            tokio::time::sleep_until(start + Duration::from_secs_f64(sample.time())).await;
        }
        let ev = StreamEvent {
            sid: sid.clone(),
            time: sample.time(),
            action: sample.label().action().to_string(),
            power: sample.power(),
        };
        out.text(encode_stream_event(&ev));
    }
    out.text(encode_warning(&Warning {
        code: WARNING_SESSION_CLOSED,
        message: format!("session {sid} closed: scenario finished"),
    }));
}
