use std::collections::VecDeque;

use serde::Serialize;

use super::label::{ClassLabel, TaskName, Threshold};
use super::WINDOW_CAPACITY;

/// Positive/negative label counts over the evidence window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowCounts {
    pub n_positive: u8,
    pub n_negative: u8,
}

/// The ten most recent labels, newest last. Starts out all neutral so a
/// decision is defined from the very first sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceWindow {
    entries: VecDeque<ClassLabel>,
    n_positive: u8,
}

impl Default for EvidenceWindow {
    fn default() -> Self {
        Self::new()
    }
}

impl EvidenceWindow {
    pub fn new() -> Self {
        Self {
            entries: std::iter::repeat_n(ClassLabel::Neutral, WINDOW_CAPACITY).collect(),
            n_positive: 0,
        }
    }

    /// Evicts the oldest label and appends `label`.
    pub fn push(&mut self, label: ClassLabel) {
        let evicted = self.entries.pop_front().expect("window is never empty");
        if evicted.is_task() {
            self.n_positive -= 1;
        }
        if label.is_task() {
            self.n_positive += 1;
        }
        self.entries.push_back(label);
    }

    pub fn n_positive(&self) -> u8 {
        self.n_positive
    }

    pub fn n_negative(&self) -> u8 {
        WINDOW_CAPACITY as u8 - self.n_positive
    }

    pub fn counts(&self) -> WindowCounts {
        WindowCounts {
            n_positive: self.n_positive(),
            n_negative: self.n_negative(),
        }
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &ClassLabel> {
        self.entries.iter()
    }

    /// Positive flags oldest first, for display.
    pub fn mask(&self) -> [bool; WINDOW_CAPACITY] {
        let mut out = [false; WINDOW_CAPACITY];
        for (slot, label) in out.iter_mut().zip(&self.entries) {
            *slot = label.is_task();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionConfig {
    pub threshold: Threshold,
    pub target: TaskName,
}

impl DecisionConfig {
    pub fn new(threshold: Threshold, target: TaskName) -> Self {
        Self { threshold, target }
    }
}

/// Activates when at least `threshold` of the last ten labels are task labels.
pub fn decide_activation(window: &EvidenceWindow, config: &DecisionConfig) -> bool {
    window.n_positive() >= config.threshold.get()
}
