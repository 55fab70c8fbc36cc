//! Command bindings and the sinks keystrokes are delivered to.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EngineError;

/// Links an activity to the key pressed when the mental task activates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "RawBinding")]
pub struct CommandBinding {
    activity: String,
    on_key: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawBinding {
    activity: String,
    on_key: String,
}

impl TryFrom<RawBinding> for CommandBinding {
    type Error = EngineError;

    fn try_from(raw: RawBinding) -> Result<Self, Self::Error> {
        CommandBinding::new(raw.activity, raw.on_key)
    }
}

impl CommandBinding {
    pub fn new(activity: impl Into<String>, on_key: impl Into<String>) -> Result<Self, EngineError> {
        let on_key = on_key.into();
        if on_key.is_empty() {
            return Err(EngineError::EmptyKey);
        }
        Ok(Self { activity: activity.into(), on_key })
    }

    pub fn activity(&self) -> &str {
        &self.activity
    }

    pub fn on_key(&self) -> &str {
        &self.on_key
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyAction {
    Press,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyEvent {
    pub key: String,
    pub action: KeyAction,
}

pub fn bind_command(binding: &CommandBinding) -> KeyEvent {
    KeyEvent {
        key: binding.on_key.clone(),
        action: KeyAction::Press,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchRecord {
    pub key: String,
    pub time: f64,
    pub sink: String,
}

impl DispatchRecord {
    /// `time_s<TAB>key<TAB>sink`, no trailing newline.
    pub fn to_tsv(&self) -> String {
        format!("{:.3}\t{}\t{}", self.time, self.key, self.sink)
    }
}

impl fmt::Display for DispatchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("key sink is closed")]
    SinkClosed,
    #[error("keystroke injection unavailable: {0}")]
    InjectionUnavailable(String),
    #[error("key sink i/o: {0}")]
    Io(#[from] io::Error),
}

/// Destination for simulated key presses.
pub trait KeySink: Send {
    fn id(&self) -> &str;

    fn dispatch(&mut self, event: &KeyEvent, now: f64) -> Result<DispatchRecord, SinkError>;

    fn close(&mut self);
}

/// Shared, inspectable list of dispatched keys.
#[derive(Debug, Clone, Default)]
pub struct DispatchLog(Arc<Mutex<Vec<DispatchRecord>>>);

impl DispatchLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, record: DispatchRecord) {
        self.0.lock().expect("dispatch log poisoned").push(record);
    }

    pub fn snapshot(&self) -> Vec<DispatchRecord> {
        self.0.lock().expect("dispatch log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("dispatch log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in self.snapshot() {
            out.push_str(&r.to_tsv());
            out.push('\n');
        }
        out
    }
}

/// Appends every dispatch to a [`DispatchLog`] and, optionally, to a
/// tab-separated log file.
pub struct RecordedSink {
    id: String,
    log: DispatchLog,
    file: Option<BufWriter<File>>,
    closed: bool,
}

impl RecordedSink {
    pub const ID: &'static str = "recorded";

    pub fn new(log: DispatchLog) -> Self {
        Self {
            id: Self::ID.to_string(),
            log,
            file: None,
            closed: false,
        }
    }

    /// Also appends each record to `path`, creating it if needed.
    pub fn with_file(log: DispatchLog, path: &Path) -> io::Result<Self> {
        let file = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(Self { file: Some(file), ..Self::new(log) })
    }

    pub fn log(&self) -> &DispatchLog {
        &self.log
    }
}

impl KeySink for RecordedSink {
    fn id(&self) -> &str {
        &self.id
    }

    fn dispatch(&mut self, event: &KeyEvent, now: f64) -> Result<DispatchRecord, SinkError> {
        if self.closed {
            return Err(SinkError::SinkClosed);
        }
        let record = DispatchRecord {
            key: event.key.clone(),
            time: now,
            sink: self.id.clone(),
        };
        if let Some(f) = self.file.as_mut() {
            writeln!(f, "{}", record.to_tsv())?;
            f.flush()?;
        }
        self.log.push(record.clone());
        Ok(record)
    }

    fn close(&mut self) {
        if let Some(mut f) = self.file.take() {
            let _ = f.flush();
        }
        self.closed = true;
    }
}

/// Prints dispatch lines to stdout.
pub struct StdoutSink {
    closed: bool,
}

impl StdoutSink {
    pub const ID: &'static str = "stdout";

    pub fn new() -> Self {
        Self { closed: false }
    }
}

impl Default for StdoutSink {
    fn default() -> Self {
        Self::new()
    }
}

impl KeySink for StdoutSink {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dispatch(&mut self, event: &KeyEvent, now: f64) -> Result<DispatchRecord, SinkError> {
        if self.closed {
            return Err(SinkError::SinkClosed);
        }
        let record = DispatchRecord {
            key: event.key.clone(),
            time: now,
            sink: Self::ID.to_string(),
        };
        let mut out = io::stdout().lock();
        writeln!(out, "{}", record.to_tsv())?;
        out.flush()?;
        Ok(record)
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

/// Injects keystrokes into the focused window through `xdotool`.
pub struct OsSink {
    program: PathBuf,
    closed: bool,
}

impl OsSink {
    pub const ID: &'static str = "os";

    /// Fails with `InjectionUnavailable` when no injector is on `PATH`.
    pub fn open() -> Result<Self, SinkError> {
        let program = find_on_path("xdotool")
            .ok_or_else(|| SinkError::InjectionUnavailable("xdotool not found on PATH".into()))?;
        Ok(Self { program, closed: false })
    }
}

impl KeySink for OsSink {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dispatch(&mut self, event: &KeyEvent, now: f64) -> Result<DispatchRecord, SinkError> {
        if self.closed {
            return Err(SinkError::SinkClosed);
        }
        let status = Command::new(&self.program)
            .arg("key")
            .arg(xdotool_keysym(&event.key))
            .status()?;
        if !status.success() {
            return Err(SinkError::InjectionUnavailable(format!("xdotool exited with {status}")));
        }
        Ok(DispatchRecord {
            key: event.key.clone(),
            time: now,
            sink: Self::ID.to_string(),
        })
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

fn xdotool_keysym(key: &str) -> &str {
    match key {
        "Space" => "space",
        "Enter" => "Return",
        "Esc" => "Escape",
        other => other,
    }
}

fn find_on_path(program: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|candidate| candidate.is_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binding_produces_press_of_on_key() {
        let youtube = CommandBinding::new("youtube", "Space").unwrap();
        assert_eq!(
            bind_command(&youtube),
            KeyEvent { key: "Space".into(), action: KeyAction::Press }
        );
        let joust = CommandBinding::new("brain-joust", "Up").unwrap();
        assert_eq!(bind_command(&joust).key, "Up");
        assert_eq!(CommandBinding::new("custom", "").unwrap_err(), EngineError::EmptyKey);
    }

    #[test]
    fn empty_key_rejected_on_deserialize() {
        let err = serde_json::from_str::<CommandBinding>(r#"{"activity":"x","onKey":""}"#);
        assert!(err.is_err());
        let ok: CommandBinding =
            serde_json::from_str(r#"{"activity":"youtube","onKey":"Space"}"#).unwrap();
        assert_eq!(ok.on_key(), "Space");
    }

    #[test]
    fn recorded_sink_appends_in_order() {
        let log = DispatchLog::new();
        let mut sink = RecordedSink::new(log.clone());
        let space = KeyEvent { key: "Space".into(), action: KeyAction::Press };
        let rec = sink.dispatch(&space, 3.2).unwrap();
        assert_eq!(rec.key, "Space");
        assert_eq!(rec.time, 3.2);
        assert_eq!(rec.sink, "recorded");
        let up = KeyEvent { key: "Up".into(), action: KeyAction::Press };
        sink.dispatch(&up, 4.0).unwrap();
        let entries = log.snapshot();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].key, "Space");
        assert_eq!(entries[1].key, "Up");
        assert_eq!(log.to_tsv(), "3.200\tSpace\trecorded\n4.000\tUp\trecorded\n");
    }

    #[test]
    fn closed_sink_refuses() {
        let mut sink = RecordedSink::new(DispatchLog::new());
        sink.close();
        let ev = KeyEvent { key: "Space".into(), action: KeyAction::Press };
        assert!(matches!(sink.dispatch(&ev, 0.0), Err(SinkError::SinkClosed)));
        let mut out = StdoutSink::new();
        out.close();
        assert!(matches!(out.dispatch(&ev, 0.0), Err(SinkError::SinkClosed)));
    }

    #[test]
    fn recorded_sink_writes_tsv_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dispatch.tsv");
        let mut sink = RecordedSink::with_file(DispatchLog::new(), &path).unwrap();
        let ev = KeyEvent { key: "Space".into(), action: KeyAction::Press };
        sink.dispatch(&ev, 0.5).unwrap();
        sink.close();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "0.500\tSpace\trecorded\n");
    }
}
