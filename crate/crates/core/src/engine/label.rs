use std::fmt;

use serde::{Deserialize, Serialize};

use super::EngineError;

/// Name of a trained mental action. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaskName(String);

impl TaskName {
    pub fn new(name: impl Into<String>) -> Result<Self, EngineError> {
        let name = name.into();
        if name.is_empty() {
            return Err(EngineError::EmptyTaskName);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TaskName {
    type Error = EngineError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        TaskName::new(s)
    }
}

impl From<TaskName> for String {
    fn from(t: TaskName) -> String {
        t.0
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Classifier output label: the neutral baseline or a trained task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Neutral,
    Task(TaskName),
}

impl ClassLabel {
    pub const NEUTRAL_ACTION: &'static str = "neutral";

    pub fn task(name: impl Into<String>) -> Result<Self, EngineError> {
        TaskName::new(name).map(ClassLabel::Task)
    }

    pub fn is_task(&self) -> bool {
        matches!(self, ClassLabel::Task(_))
    }

    /// Action string as it appears on the `com` stream.
    pub fn action(&self) -> &str {
        match self {
            ClassLabel::Neutral => Self::NEUTRAL_ACTION,
            ClassLabel::Task(t) => t.as_str(),
        }
    }
}

/// One classifier output.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    label: ClassLabel,
    power: f64,
    time: f64,
}

impl LabeledSample {
    pub fn new(label: ClassLabel, power: f64, time: f64) -> Result<Self, EngineError> {
        if !(0.0..=1.0).contains(&power) {
            return Err(EngineError::PowerOutOfRange(power));
        }
        Ok(Self { label, power, time })
    }

    pub fn label(&self) -> &ClassLabel {
        &self.label
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Sensitivity threshold: minimum number of task labels among the last ten
/// samples needed to activate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Threshold(u8);

impl Threshold {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = super::WINDOW_CAPACITY as u8;

    pub fn new(value: i64) -> Result<Self, EngineError> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(EngineError::ThresholdOutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Threshold> {
        (Self::MIN..=Self::MAX).map(Threshold)
    }
}

impl TryFrom<u8> for Threshold {
    type Error = EngineError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Threshold::new(v.into())
    }
}

impl From<Threshold> for u8 {
    fn from(t: Threshold) -> u8 {
        t.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
