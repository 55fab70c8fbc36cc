//! Session orchestration: profiles, the live session owner, threshold
//! updates and status fan-out. [`api`] puts an HTTP/WebSocket control plane
//! in front of it.

mod activities;
pub mod api;
mod phase;
mod profiles;
mod status;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};

pub use activities::{preset, preset_activities};
pub use phase::SessionPhase;
pub use profiles::{ProfileRecord, ProfileStore};
pub use status::{Counts, Level, StatusBus, StatusEvent, StatusSubscription};

use crate::client::{self, CortexClient, Subscription};
use crate::engine::{
    CommandBinding, DecisionConfig, DispatchLog, DispatchRecord, Emitter, EvidenceWindow, KeySink,
    LabeledSample, OsSink, Pipeline, RecordedSink, StdoutSink, Threshold,
    DEFAULT_REFRACTORY_SECONDS,
};
use crate::protocol::{Inbound, DEFAULT_PORT, WARNING_SESSION_CLOSED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DaemonError {
    #[error("profile {0:?} not found")]
    ProfileNotFound(String),
    #[error("profile {0:?} is not trained yet; train it first")]
    ProfileUntrained(String),
    #[error("a session is already {0}")]
    AlreadyRunning(SessionPhase),
    #[error("no session running (phase {0})")]
    NotRunning(SessionPhase),
    #[error("session faulted; reset before starting again")]
    Faulted,
    #[error("threshold {0} outside 1..=10")]
    OutOfRange(i64),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("training rejected: {0}")]
    TrainingRejected(String),
    #[error("profile {0:?} already exists")]
    DuplicateName(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profile store: {0}")]
    StoreIo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkKind {
    Recorded,
    Stdout,
    Os,
}

/// Which clock stamps dispatch records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchClock {
    /// The sample's stream timestamp; reproducible across runs.
    Stream,
    /// Seconds since daemon start, the same clock as status events.
    Monotonic,
}

#[derive(Debug, Clone)]
pub struct DaemonConfig {
    pub cortex_url: String,
    pub sink: SinkKind,
    pub dispatch_clock: DispatchClock,
    pub refractory_seconds: f64,
    /// Recorded sink also appends to this tab-separated file.
    pub dispatch_log_path: Option<PathBuf>,
}

impl Default for DaemonConfig {
    fn default() -> Self {
        Self {
            cortex_url: format!("ws://127.0.0.1:{DEFAULT_PORT}/"),
            sink: SinkKind::Recorded,
            dispatch_clock: DispatchClock::Monotonic,
            refractory_seconds: DEFAULT_REFRACTORY_SECONDS,
            dispatch_log_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionInfo {
    pub phase: SessionPhase,
    pub threshold: Option<Threshold>,
    pub counts: Option<Counts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionHandle {
    pub id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainingOutcome {
    pub profile: String,
    pub action: String,
    pub trained: bool,
}

enum Control {
    SetThreshold(Threshold, oneshot::Sender<Result<(), DaemonError>>),
    Stop(oneshot::Sender<StatusEvent>),
}

struct Live {
    phase: SessionPhase,
    threshold: Option<Threshold>,
    counts: Option<Counts>,
    control: Option<mpsc::UnboundedSender<Control>>,
    sessions: u64,
}

struct Inner {
    config: DaemonConfig,
    started: Instant,
    profiles: Mutex<ProfileStore>,
    status: StatusBus,
    live: Mutex<Live>,
    phase_tx: watch::Sender<SessionPhase>,
    dispatch_log: DispatchLog,
}

/// The bridge daemon. Cheap to clone; all clones share one state.
#[derive(Clone)]
pub struct Daemon {
    inner: Arc<Inner>,
}

impl Daemon {
    pub fn new(config: DaemonConfig, profiles: ProfileStore) -> Self {
        let (phase_tx, _) = watch::channel(SessionPhase::Idle);
        Self {
            inner: Arc::new(Inner {
                config,
                started: Instant::now(),
                profiles: Mutex::new(profiles),
                status: StatusBus::new(),
                live: Mutex::new(Live {
                    phase: SessionPhase::Idle,
                    threshold: None,
                    counts: None,
                    control: None,
                    sessions: 0,
                }),
                phase_tx,
                dispatch_log: DispatchLog::new(),
            }),
        }
    }

    pub fn config(&self) -> &DaemonConfig {
        &self.inner.config
    }

    /// Seconds since the daemon started; the clock status events use.
    pub fn elapsed(&self) -> f64 {
        self.inner.elapsed()
    }

    pub fn phase(&self) -> SessionPhase {
        self.inner.live().phase
    }

    pub fn session_info(&self) -> SessionInfo {
        let live = self.inner.live();
        SessionInfo { phase: live.phase, threshold: live.threshold, counts: live.counts }
    }

    pub fn status_subscribe(&self) -> StatusSubscription {
        self.inner.status.subscribe()
    }

    pub fn phase_watch(&self) -> watch::Receiver<SessionPhase> {
        self.inner.phase_tx.subscribe()
    }

    /// Waits until the phase satisfies `pred`, up to `timeout`.
    pub async fn wait_for_phase(
        &self,
        timeout: Duration,
        pred: impl Fn(SessionPhase) -> bool,
    ) -> Option<SessionPhase> {
        let mut rx = self.phase_watch();
        let fut = async {
            loop {
                let p = *rx.borrow_and_update();
                if pred(p) {
                    return Some(p);
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        };
        tokio::time::timeout(timeout, fut).await.ok().flatten()
    }

    /// Records dispatched by the recorded sink, across all sessions.
    pub fn dispatch_log(&self) -> &DispatchLog {
        &self.inner.dispatch_log
    }

    pub fn get_profiles(&self) -> Vec<ProfileRecord> {
        self.inner.store().list()
    }

    pub fn put_profile(&self, record: ProfileRecord, overwrite: bool) -> Result<(), DaemonError> {
        self.inner.store().put(record, overwrite)
    }

    /// Starts a session; returns once the phase is Connecting. Handshake
    /// success or failure shows up on the status stream.
    pub fn start_session(
        &self,
        profile: &str,
        activity: &str,
        threshold: i64,
    ) -> Result<SessionHandle, DaemonError> {
        let threshold = Threshold::new(threshold).map_err(|_| DaemonError::OutOfRange(threshold))?;
        let record = self
            .inner
            .store()
            .get(profile)
            .cloned()
            .ok_or_else(|| DaemonError::ProfileNotFound(profile.to_string()))?;
        if !record.trained {
            return Err(DaemonError::ProfileUntrained(record.name));
        }
        let binding = if record.binding.activity() == activity {
            record.binding.clone()
        } else {
            preset(activity).ok_or_else(|| DaemonError::UnknownActivity(activity.to_string()))?
        };

        let mut live = self.inner.live();
        match live.phase {
            SessionPhase::Idle => {}
            SessionPhase::Faulted => return Err(DaemonError::Faulted),
            other => return Err(DaemonError::AlreadyRunning(other)),
        }
        let (tx, rx) = mpsc::unbounded_channel();
        live.control = Some(tx);
        live.threshold = Some(threshold);
        live.sessions += 1;
        let id = live.sessions;
        let message = format!(
            "connecting to {} for profile {} ({} → {})",
            self.inner.config.cortex_url,
            record.name,
            binding.activity(),
            binding.on_key()
        );
        self.inner.transition(&mut live, SessionPhase::Connecting, Level::Info, message);
        drop(live);

        tokio::spawn(run_session(self.inner.clone(), record, binding, threshold, rx));
        Ok(SessionHandle { id })
    }

    /// Stops the running session. Once this returns, no further keys are
    /// dispatched; the returned event is the final Idle transition.
    pub async fn stop_session(&self) -> Result<StatusEvent, DaemonError> {
        let tx = {
            let live = self.inner.live();
            if !live.phase.is_running() {
                return Err(DaemonError::NotRunning(live.phase));
            }
            live.control.clone().ok_or(DaemonError::NotRunning(live.phase))?
        };
        let (ack, done) = oneshot::channel();
        tx.send(Control::Stop(ack)).map_err(|_| DaemonError::NotRunning(self.phase()))?;
        done.await.map_err(|_| DaemonError::NotRunning(self.phase()))
    }

    /// Applies `threshold` before the next sample is processed.
    pub async fn set_threshold(&self, threshold: i64) -> Result<Threshold, DaemonError> {
        let t = Threshold::new(threshold).map_err(|_| DaemonError::OutOfRange(threshold))?;
        let tx = {
            let live = self.inner.live();
            if live.phase != SessionPhase::Streaming {
                return Err(DaemonError::NotRunning(live.phase));
            }
            live.control.clone().ok_or(DaemonError::NotRunning(live.phase))?
        };
        let (ack, done) = oneshot::channel();
        tx.send(Control::SetThreshold(t, ack))
            .map_err(|_| DaemonError::NotRunning(self.phase()))?;
        done.await.map_err(|_| DaemonError::NotRunning(self.phase()))??;
        Ok(t)
    }

    /// Clears a fault, returning to Idle.
    pub fn reset(&self) -> Result<StatusEvent, DaemonError> {
        let mut live = self.inner.live();
        if live.phase != SessionPhase::Faulted {
            return Err(DaemonError::NotRunning(live.phase));
        }
        Ok(self.inner.transition(&mut live, SessionPhase::Idle, Level::Info, "fault cleared".into()))
    }

    /// Trains the profile's task against the headset service on a
    /// transient connection and marks the profile trained.
    pub async fn train_action(&self, profile: &str) -> Result<TrainingOutcome, DaemonError> {
        let record = self
            .inner
            .store()
            .get(profile)
            .cloned()
            .ok_or_else(|| DaemonError::ProfileNotFound(profile.to_string()))?;
        let action = record.task_name.to_string();
        self.inner.publish(Level::Info, format!("training {action} for profile {profile}"));

        let outcome = client::train_action(&self.inner.config.cortex_url, profile, &action).await;
        let rejected = match outcome {
            Ok(result) if result.get("status").and_then(Value::as_str) == Some("succeeded") => None,
            Ok(result) => Some(format!("unexpected training result {result}")),
            Err(e) => Some(e.to_string()),
        };
        if let Some(reason) = rejected {
            self.inner.publish(Level::Warn, format!("training {action} failed: {reason}"));
            return Err(DaemonError::TrainingRejected(reason));
        }
        self.inner.store().set_trained(profile, true)?;
        self.inner.publish(Level::Info, format!("profile {profile} trained for {action}"));
        Ok(TrainingOutcome { profile: profile.to_string(), action, trained: true })
    }
}

impl Inner {
    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn live(&self) -> MutexGuard<'_, Live> {
        self.live.lock().expect("session state poisoned")
    }

    fn store(&self) -> MutexGuard<'_, ProfileStore> {
        self.profiles.lock().expect("profile store poisoned")
    }

    fn event(&self, live: &Live, level: Level, message: String) -> StatusEvent {
        StatusEvent {
            time: self.elapsed(),
            level,
            message,
            phase: live.phase,
            counts: if live.phase == SessionPhase::Streaming { live.counts } else { None },
        }
    }

    fn publish(&self, level: Level, message: String) -> StatusEvent {
        let live = self.live();
        let ev = self.event(&live, level, message);
        self.status.publish(ev.clone());
        ev
    }

    fn transition(&self, live: &mut Live, to: SessionPhase, level: Level, message: String) -> StatusEvent {
        debug_assert!(live.phase.can_transition(to), "{} -> {to}", live.phase);
        live.phase = to;
        if to != SessionPhase::Streaming {
            live.counts = None;
        }
        if !to.is_running() {
            live.control = None;
        }
        let ev = self.event(live, level, message);
        self.status.publish(ev.clone());
        self.phase_tx.send_replace(to);
        ev
    }

    fn fault(&self, message: String) -> StatusEvent {
        let mut live = self.live();
        self.transition(&mut live, SessionPhase::Faulted, Level::Error, message)
    }

    /// Stopping → Idle with the given reason. Returns the Idle event.
    fn wind_down(&self, reason: String) -> StatusEvent {
        let mut live = self.live();
        if live.phase != SessionPhase::Stopping {
            self.transition(&mut live, SessionPhase::Stopping, Level::Info, reason);
        }
        self.transition(&mut live, SessionPhase::Idle, Level::Info, "session stopped".into())
    }

    fn open_sink(&self) -> Box<dyn KeySink> {
        let recorded = || -> Box<dyn KeySink> {
            let log = self.dispatch_log.clone();
            if let Some(path) = &self.config.dispatch_log_path {
                match RecordedSink::with_file(log.clone(), path) {
                    Ok(sink) => return Box::new(sink),
                    Err(e) => self.publish(
                        Level::Warn,
                        format!("cannot open dispatch log {}: {e}; recording in memory", path.display()),
                    ),
                };
            }
            Box::new(RecordedSink::new(log))
        };
        match self.config.sink {
            SinkKind::Recorded => recorded(),
            SinkKind::Stdout => Box::new(StdoutSink::new()),
            SinkKind::Os => match OsSink::open() {
                Ok(sink) => Box::new(sink),
                Err(e) => {
                    self.publish(Level::Warn, format!("{e}; falling back to recorded sink"));
                    recorded()
                }
            },
        }
    }
}

async fn run_session(
    inner: Arc<Inner>,
    profile: ProfileRecord,
    binding: CommandBinding,
    threshold: Threshold,
    mut control: mpsc::UnboundedReceiver<Control>,
) {
    let url = inner.config.cortex_url.clone();
    let connect = async {
        let mut c = CortexClient::connect(&url).await?;
        let sub = c.handshake(&profile.name).await?;
        Ok::<(CortexClient, Subscription), client::ClientError>((c, sub))
    };
    tokio::pin!(connect);

    let (mut conn, sub) = loop {
        tokio::select! {
            res = &mut connect => match res {
                Ok(v) => break v,
                Err(e) => {
                    inner.fault(format!("connection to {url} failed: {e}"));
                    return;
                }
            },
            msg = control.recv() => match msg {
                Some(Control::Stop(ack)) => {
                    let ev = inner.wind_down("stop requested; connection abandoned".into());
                    let _ = ack.send(ev);
                    return;
                }
                Some(Control::SetThreshold(_, ack)) => {
                    let _ = ack.send(Err(DaemonError::NotRunning(SessionPhase::Connecting)));
                }
                None => {
                    inner.wind_down("daemon shutting down".into());
                    return;
                }
            },
        }
    };

    let config = DecisionConfig::new(threshold, profile.task_name.clone());
    let emitter = Emitter::new(inner.config.refractory_seconds).unwrap_or_default();
    let mut pipeline = Pipeline::new(config, binding, emitter);
    {
        let mut live = inner.live();
        live.counts = Some(EvidenceWindow::new().counts().into());
        let message = format!("streaming {} from session {}", profile.task_name, sub.session);
        inner.transition(&mut live, SessionPhase::Streaming, Level::Info, message);
    }
    let mut sink = inner.open_sink();

    loop {
        tokio::select! {
            biased;
            msg = control.recv() => match msg {
                Some(Control::SetThreshold(t, ack)) => {
                    pipeline.set_threshold(t);
                    inner.live().threshold = Some(t);
                    inner.publish(Level::Info, format!("threshold set to {t}"));
                    let _ = ack.send(Ok(()));
                }
                Some(Control::Stop(ack)) => {
                    inner.live().phase_stopping(&inner, "stop requested");
                    sink.close();
                    conn.close().await;
                    let ev = inner.wind_down("stop requested".into());
                    let _ = ack.send(ev);
                    return;
                }
                None => {
                    sink.close();
                    conn.close().await;
                    inner.wind_down("daemon shutting down".into());
                    return;
                }
            },
            frame = conn.recv() => match frame {
                Ok(Some(Inbound::Stream(ev))) => {
                    if ev.sid != sub.session {
                        tracing::debug!(sid = %ev.sid, "sample for another session ignored");
                        continue;
                    }
                    let label = pipeline.classify(&ev.action);
                    let step = LabeledSample::new(label, ev.power, ev.time)
                        .and_then(|sample| pipeline.process(&sample));
                    let step = match step {
                        Ok(step) => step,
                        Err(e) => {
                            sink.close();
                            conn.close().await;
                            inner.fault(format!("stream rejected: {e}; session stopped"));
                            return;
                        }
                    };
                    let counts = Counts::from(step.counts);
                    inner.live().counts = Some(counts);
                    inner.publish(
                        Level::Info,
                        format!("positive: {} / negative: {}", counts.n_positive, counts.n_negative),
                    );
                    if let Some(key) = step.key {
                        let now = match inner.config.dispatch_clock {
                            DispatchClock::Stream => ev.time,
                            DispatchClock::Monotonic => inner.elapsed(),
                        };
                        match sink.dispatch(&key, now) {
                            Ok(DispatchRecord { key, sink, .. }) => {
                                inner.publish(Level::Info, format!("sent {key} via {sink}"));
                            }
                            Err(e) => {
                                inner.publish(Level::Warn, format!("dispatch of {} failed: {e}", key.key));
                            }
                        }
                    }
                }
                Ok(Some(Inbound::Warning(w))) if w.code == WARNING_SESSION_CLOSED => {
                    sink.close();
                    conn.close().await;
                    inner.wind_down(format!("headset session ended: {}", w.message));
                    return;
                }
                Ok(Some(Inbound::Warning(w))) => {
                    inner.publish(Level::Warn, format!("server warning {}: {}", w.code, w.message));
                }
                Ok(Some(Inbound::Response(resp))) => {
                    tracing::debug!(id = resp.id, "unsolicited response ignored");
                }
                Ok(None) => {
                    sink.close();
                    inner.fault("headset service closed the connection".into());
                    return;
                }
                Err(client::ClientError::Decode(e)) => {
                    inner.publish(Level::Warn, format!("dropped bad frame: {e}"));
                }
                Err(e) => {
                    sink.close();
                    inner.fault(format!("connection lost: {e}"));
                    return;
                }
            },
        }
    }
}

impl Live {
    /// Enters Stopping before the transport is torn down, so observers see
    /// the stop begin even if closing takes a while.
    fn phase_stopping(&mut self, inner: &Inner, reason: &str) {
        if self.phase == SessionPhase::Streaming {
            inner.transition(self, SessionPhase::Stopping, Level::Info, reason.to_string());
        }
    }
}
