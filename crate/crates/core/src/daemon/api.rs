//! HTTP control API and the `/events` status WebSocket.
//!
//! Errors come back as `{"error": "<Kind>", "message": "..."}` with a
//! matching status code.

use std::net::SocketAddr;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

use super::{Daemon, DaemonError, ProfileRecord};
use crate::engine::{CommandBinding, TaskName, Threshold};

pub fn router(daemon: Daemon) -> Router {
    Router::new()
        .route("/profiles", get(list_profiles))
        .route("/profiles/{name}", put(put_profile))
        .route("/profiles/{name}/train", post(train))
        .route("/activities", get(activities))
        .route(
            "/session",
            get(session_info).post(start_session).delete(stop_session).patch(patch_session),
        )
        .route("/events", get(events))
        .with_state(daemon)
}

/// Binds `addr` and serves until the returned task is aborted.
pub async fn serve(
    daemon: Daemon,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(daemon);
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("control API stopped: {e}");
        }
    });
    Ok((local, task))
}

impl DaemonError {
    pub fn kind(&self) -> &'static str {
        match self {
            DaemonError::ProfileNotFound(_) => "ProfileNotFound",
            DaemonError::ProfileUntrained(_) => "ProfileUntrained",
            DaemonError::AlreadyRunning(_) => "AlreadyRunning",
            DaemonError::NotRunning(_) => "NotRunning",
            DaemonError::Faulted => "Faulted",
            DaemonError::OutOfRange(_) => "OutOfRange",
            DaemonError::UnknownActivity(_) => "UnknownActivity",
            DaemonError::TrainingRejected(_) => "TrainingRejected",
            DaemonError::DuplicateName(_) => "DuplicateName",
            DaemonError::InvalidProfile(_) => "InvalidProfile",
            DaemonError::StoreIo(_) => "StoreIo",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            DaemonError::ProfileNotFound(_) => StatusCode::NOT_FOUND,
            DaemonError::OutOfRange(_)
            | DaemonError::UnknownActivity(_)
            | DaemonError::InvalidProfile(_) => StatusCode::BAD_REQUEST,
            DaemonError::ProfileUntrained(_)
            | DaemonError::AlreadyRunning(_)
            | DaemonError::NotRunning(_)
            | DaemonError::Faulted
            | DaemonError::DuplicateName(_) => StatusCode::CONFLICT,
            DaemonError::TrainingRejected(_) => StatusCode::BAD_GATEWAY,
            DaemonError::StoreIo(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for DaemonError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

async fn list_profiles(State(d): State<Daemon>) -> Json<Vec<ProfileRecord>> {
    Json(d.get_profiles())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ProfileBody {
    name: Option<String>,
    task_name: TaskName,
    binding: CommandBinding,
    default_threshold: Threshold,
    #[serde(default)]
    trained: bool,
}

#[derive(Deserialize)]
struct OverwriteQuery {
    #[serde(default)]
    overwrite: bool,
}

async fn put_profile(
    State(d): State<Daemon>,
    Path(name): Path<String>,
    Query(q): Query<OverwriteQuery>,
    Json(body): Json<ProfileBody>,
) -> Result<(StatusCode, Json<ProfileRecord>), DaemonError> {
    if body.name.as_ref().is_some_and(|n| *n != name) {
        return Err(DaemonError::InvalidProfile(format!("body name does not match path {name:?}")));
    }
    let record = ProfileRecord {
        name,
        task_name: body.task_name,
        binding: body.binding,
        default_threshold: body.default_threshold,
        trained: body.trained,
    };
    d.put_profile(record.clone(), q.overwrite)?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn train(State(d): State<Daemon>, Path(name): Path<String>) -> Response {
    match d.train_action(&name).await {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn activities() -> Json<Vec<CommandBinding>> {
    Json(super::preset_activities())
}

async fn session_info(State(d): State<Daemon>) -> Response {
    Json(d.session_info()).into_response()
}

#[derive(Deserialize)]
struct StartBody {
    profile: String,
    activity: String,
    threshold: i64,
}

async fn start_session(State(d): State<Daemon>, Json(body): Json<StartBody>) -> Response {
    match d.start_session(&body.profile, &body.activity, body.threshold) {
        Ok(handle) => {
            let info = d.session_info();
            let body = json!({ "session": handle.id, "phase": info.phase, "threshold": info.threshold });
            (StatusCode::ACCEPTED, Json(body)).into_response()
        }
        Err(e) => e.into_response(),
    }
}

/// Stops a running session, or clears a fault.
async fn stop_session(State(d): State<Daemon>) -> Response {
    let result = if d.phase() == super::SessionPhase::Faulted { d.reset() } else { d.stop_session().await };
    match result {
        Ok(ev) => Json(ev).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct PatchBody {
    threshold: i64,
}

async fn patch_session(State(d): State<Daemon>, Json(body): Json<PatchBody>) -> Response {
    match d.set_threshold(body.threshold).await {
        Ok(t) => Json(json!({ "threshold": t })).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn events(State(d): State<Daemon>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| forward_events(d, socket))
}

async fn forward_events(d: Daemon, mut socket: WebSocket) {
    let mut sub = d.status_subscribe();
    loop {
        tokio::select! {
            ev = sub.recv() => {
                let Some(ev) = ev else { break };
                let text = serde_json::to_string(&ev).expect("status events serialize");
                if socket.send(Message::text(text)).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
