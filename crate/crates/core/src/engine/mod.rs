//! Evidence window, activation rule and keystroke dispatch.

mod emitter;
mod keys;
mod label;
mod pipeline;
mod window;

use thiserror::Error;

pub use emitter::{ActivationEvent, Emitter, DEFAULT_REFRACTORY_SECONDS};
pub use keys::{
    bind_command, CommandBinding, DispatchLog, DispatchRecord, KeyAction, KeyEvent, KeySink,
    OsSink, RecordedSink, SinkError, StdoutSink,
};
pub use label::{ClassLabel, LabeledSample, TaskName, Threshold};
pub use pipeline::{classify_action, Pipeline, Step};
pub use window::{decide_activation, DecisionConfig, EvidenceWindow, WindowCounts};

/// Number of most recent labels the decision looks at.
pub const WINDOW_CAPACITY: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("task name must not be empty")]
    EmptyTaskName,
    #[error("key identifier must not be empty")]
    EmptyKey,
    #[error("power {0} outside [0, 1]")]
    PowerOutOfRange(f64),
    #[error("threshold {0} outside 1..=10")]
    ThresholdOutOfRange(i64),
    #[error("refractory period {0} must be a non-negative number of seconds")]
    InvalidRefractory(f64),
    #[error("clock went backwards from {previous} to {now}")]
    ClockRegression { previous: f64, now: f64 },
}
