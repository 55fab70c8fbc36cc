use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::engine::{ClassLabel, LabeledSample, TaskName};

/// Default classifier output rate: ten samples span about one second.
pub const DEFAULT_RATE_HZ: f64 = 10.0;

/// Action name streamed for task segments when the file does not set one.
pub const DEFAULT_ACTION: &str = "push";

/// Half-width of the uniform jitter applied around a segment's power mean.
const POWER_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Neutral,
    Task,
}

impl Intent {
    fn flipped(self) -> Intent {
        match self {
            Intent::Neutral => Intent::Task,
            Intent::Task => Intent::Neutral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    pub intent: Intent,
    pub duration_seconds: f64,
    pub flip_probability: f64,
    pub power_mean: f64,
}

impl Segment {
    pub fn clean(intent: Intent, duration_seconds: f64) -> Self {
        Self {
            intent,
            duration_seconds,
            flip_probability: 0.0,
            power_mean: if intent == Intent::Task { 0.8 } else { 0.0 },
        }
    }

    pub fn noisy(intent: Intent, duration_seconds: f64, flip_probability: f64) -> Self {
        Self { flip_probability, ..Self::clean(intent, duration_seconds) }
    }
}

/// A segment placed on the scenario timeline, half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub intent: Intent,
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Scripted ground-truth intent timeline driving the mock headset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub seed: u64,
    #[serde(default = "default_action")]
    pub action: TaskName,
    pub segments: Vec<Segment>,
}

fn default_rate() -> f64 {
    DEFAULT_RATE_HZ
}

fn default_action() -> TaskName {
    TaskName::new(DEFAULT_ACTION).expect("non-empty")
}

impl Scenario {
    pub fn new(name: impl Into<String>, seed: u64, segments: Vec<Segment>) -> Result<Self, SimError> {
        let scenario = Self {
            name: name.into(),
            rate_hz: DEFAULT_RATE_HZ,
            seed,
            action: default_action(),
            segments,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return invalid(format!("rateHz must be positive, got {}", self.rate_hz));
        }
        if self.segments.is_empty() {
            return invalid("at least one segment is required".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_seconds > 0.0 && s.duration_seconds.is_finite()) {
                return invalid(format!("segment {i}: durationSeconds must be positive"));
            }
            if !(0.0..=0.5).contains(&s.flip_probability) {
                return invalid(format!("segment {i}: flipProbability must be in [0, 0.5]"));
            }
            if !(0.0..=1.0).contains(&s.power_mean) {
                return invalid(format!("segment {i}: powerMean must be in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn label_for(&self, intent: Intent) -> ClassLabel {
        match intent {
            Intent::Neutral => ClassLabel::Neutral,
            Intent::Task => ClassLabel::Task(self.action.clone()),
        }
    }

    pub fn spans(&self) -> Vec<Span> {
        let mut start = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let span = Span { intent: s.intent, start, end: start + s.duration_seconds };
                start = span.end;
                span
            })
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_seconds).sum()
    }

    pub fn task_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.intent == Intent::Task).count()
    }

    /// Number of samples a segment contributes: floor(duration × rate).
    pub fn samples_in(&self, segment: &Segment) -> usize {
        // Tolerate representation error such as 2.3 × 10 = 22.999…
        (segment.duration_seconds * self.rate_hz + 1e-9).floor() as usize
    }
}

/// Deterministic noisy label stream for `scenario`.
///
/// Each segment yields `floor(duration × rate)` samples at uniform spacing
/// from the segment start; each label is the segment intent, flipped to the
/// other class with the segment's flip probability.
pub fn generate_stream(scenario: &Scenario) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = Vec::new();
    for (segment, span) in scenario.segments.iter().zip(scenario.spans()) {
        for k in 0..scenario.samples_in(segment) {
            let time = span.start + k as f64 / scenario.rate_hz;
            let flip = rng.random::<f64>() < segment.flip_probability;
            let jitter = rng.random_range(-POWER_JITTER..=POWER_JITTER);
            let intent = if flip { segment.intent.flipped() } else { segment.intent };
            let power = (segment.power_mean + jitter).clamp(0.0, 1.0);
            let sample = LabeledSample::new(scenario.label_for(intent), power, time)
                .expect("power clamped to [0, 1]");
            out.push(sample);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_clean_task_yields_ten_samples() {
        let s = Scenario::new("t", 1, vec![Segment::clean(Intent::Task, 1.0)]).unwrap();
        let stream = generate_stream(&s);
        assert_eq!(stream.len(), 10);
        for (i, sample) in stream.iter().enumerate() {
            assert!(sample.label().is_task());
            assert!((sample.time() - i as f64 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn two_second_neutral_yields_twenty() {
        let s = Scenario::new("n", 1, vec![Segment::clean(Intent::Neutral, 2.0)]).unwrap();
        let stream = generate_stream(&s);
        assert_eq!(stream.len(), 20);
        assert!(stream.iter().all(|x| !x.label().is_task()));
    }

    #[test]
    fn noisy_task_fraction_near_expected() {
        let s = Scenario::new("noisy", 42, vec![Segment::noisy(Intent::Task, 100.0, 0.2)]).unwrap();
        let stream = generate_stream(&s);
        assert_eq!(stream.len(), 1000);
        let frac = stream.iter().filter(|x| x.label().is_task()).count() as f64 / 1000.0;
        // Binomial(1000, 0.8): sd ≈ 0.0126, so ±0.05 is ~4 sd.
        assert!((0.75..=0.85).contains(&frac), "task fraction {frac}");
    }

    #[test]
    fn same_seed_same_stream() {
        let s = Scenario::new("r", 9, vec![Segment::noisy(Intent::Task, 5.0, 0.3)]).unwrap();
        assert_eq!(generate_stream(&s), generate_stream(&s));
        let other = Scenario { seed: 10, ..s.clone() };
        assert_ne!(generate_stream(&s), generate_stream(&other));
    }

    #[test]
    fn awkward_durations_floor_correctly() {
        let s = Scenario::new("f", 1, vec![Segment::clean(Intent::Neutral, 2.3)]).unwrap();
        assert_eq!(generate_stream(&s).len(), 23);
        let s = Scenario::new("f", 1, vec![Segment::clean(Intent::Neutral, 0.25)]).unwrap();
        assert_eq!(generate_stream(&s).len(), 2);
    }

    #[test]
    fn validation() {
        assert!(Scenario::new("e", 1, vec![]).is_err());
        assert!(Scenario::new("e", 1, vec![Segment::noisy(Intent::Task, 1.0, 0.6)]).is_err());
        assert!(Scenario::new("e", 1, vec![Segment::clean(Intent::Task, 0.0)]).is_err());
    }

    #[test]
    fn parses_file_format() {
        let text = r#"{"name":"demo","rateHz":10.0,"seed":7,
            "segments":[{"intent":"neutral","durationSeconds":2.0,"flipProbability":0.1,"powerMean":0.2},
                        {"intent":"task","durationSeconds":3.0,"flipProbability":0.0,"powerMean":0.9}]}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.action.as_str(), "push");
        assert_eq!(s.segments[1].intent, Intent::Task);
        assert_eq!(s.spans()[1], Span { intent: Intent::Task, start: 2.0, end: 5.0 });
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        assert!(Scenario::from_json(r#"{"name":"x","seed":1,"segments":[]}"#).is_err());
    }
}
