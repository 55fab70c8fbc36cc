use super::emitter::Emitter;
use super::keys::{bind_command, CommandBinding, KeyEvent};
use super::label::{ClassLabel, LabeledSample, TaskName, Threshold};
use super::window::{decide_activation, DecisionConfig, EvidenceWindow, WindowCounts};
use super::EngineError;

/// Result of feeding one sample through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub counts: WindowCounts,
    pub decision: bool,
    /// Key to dispatch, set only on an activation.
    pub key: Option<KeyEvent>,
}

/// Window, decision rule, emitter and binding for one session.
#[derive(Debug, Clone)]
pub struct Pipeline {
    window: EvidenceWindow,
    config: DecisionConfig,
    emitter: Emitter,
    binding: CommandBinding,
}

impl Pipeline {
    pub fn new(config: DecisionConfig, binding: CommandBinding, emitter: Emitter) -> Self {
        Self {
            window: EvidenceWindow::new(),
            config,
            emitter,
            binding,
        }
    }

    pub fn window(&self) -> &EvidenceWindow {
        &self.window
    }

    pub fn config(&self) -> &DecisionConfig {
        &self.config
    }

    pub fn threshold(&self) -> Threshold {
        self.config.threshold
    }

    pub fn set_threshold(&mut self, threshold: Threshold) {
        self.config.threshold = threshold;
    }

    /// Maps a stream action onto the binary model: the configured target
    /// task is positive, everything else (neutral or another task) negative.
    pub fn classify(&self, action: &str) -> ClassLabel {
        classify_action(&self.config.target, action)
    }

    pub fn process(&mut self, sample: &LabeledSample) -> Result<Step, EngineError> {
        let label = match sample.label() {
            ClassLabel::Task(name) if *name == self.config.target => sample.label().clone(),
            _ => ClassLabel::Neutral,
        };
        // Check the clock before mutating the window so a regression leaves
        // the whole pipeline untouched.
        let mut window = self.window.clone();
        window.push(label);
        let decision = decide_activation(&window, &self.config);
        let activation = self.emitter.step(decision, sample.time())?;
        self.window = window;
        Ok(Step {
            counts: self.window.counts(),
            decision,
            key: activation.map(|_| bind_command(&self.binding)),
        })
    }
}

pub fn classify_action(target: &TaskName, action: &str) -> ClassLabel {
    if action == target.as_str() {
        ClassLabel::Task(target.clone())
    } else {
        ClassLabel::Neutral
    }
}
