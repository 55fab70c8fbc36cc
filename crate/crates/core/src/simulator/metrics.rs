use serde::Serialize;

use super::scenario::{generate_stream, Intent, Scenario};
use crate::engine::{
    CommandBinding, DecisionConfig, DispatchLog, DispatchRecord, Emitter, EngineError, KeySink,
    LabeledSample, Pipeline, RecordedSink, Threshold, DEFAULT_REFRACTORY_SECONDS,
};

/// Header of the metrics CSV.
pub const METRICS_CSV_HEADER: &str = "threshold,falseActivations,missedSegments,meanLatencySeconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub threshold: u8,
    /// Activations inside neutral-intent segments.
    pub false_activations: usize,
    /// Activations inside task-intent segments.
    pub task_activations: usize,
    /// Task segments with no activation at all.
    pub missed_segments: usize,
    /// Segment start to first activation, per detected task segment.
    pub detection_latencies: Vec<f64>,
}

impl MetricsReport {
    pub fn mean_latency(&self) -> Option<f64> {
        if self.detection_latencies.is_empty() {
            None
        } else {
            Some(self.detection_latencies.iter().sum::<f64>() / self.detection_latencies.len() as f64)
        }
    }

    pub fn csv_row(&self) -> String {
        let latency = self.mean_latency().map(|l| format!("{l:.4}")).unwrap_or_default();
        format!(
            "{},{},{},{}",
            self.threshold, self.false_activations, self.missed_segments, latency
        )
    }
}

pub fn metrics_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Scores a dispatch log against the scenario's ground truth. Each event
/// belongs to the segment whose half-open span contains its timestamp;
/// events past the end of the scenario are ignored.
pub fn evaluate_run(scenario: &Scenario, log: &[DispatchRecord], threshold: Threshold) -> MetricsReport {
    let spans = scenario.spans();
    let mut first_hit: Vec<Option<f64>> = vec![None; spans.len()];
    let mut false_activations = 0;
    let mut task_activations = 0;

    for record in log {
        let Some(idx) = spans.iter().position(|s| s.contains(record.time)) else {
            continue;
        };
        match spans[idx].intent {
            Intent::Neutral => false_activations += 1,
            Intent::Task => {
                task_activations += 1;
                let hit = first_hit[idx].get_or_insert(record.time);
                *hit = hit.min(record.time);
            }
        }
    }

    let mut missed_segments = 0;
    let mut detection_latencies = Vec::new();
    for (span, hit) in spans.iter().zip(&first_hit) {
        if span.intent != Intent::Task {
            continue;
        }
        match hit {
            Some(t) => detection_latencies.push(t - span.start),
            None => missed_segments += 1,
        }
    }

    MetricsReport {
        threshold: threshold.get(),
        false_activations,
        task_activations,
        missed_segments,
        detection_latencies,
    }
}

/// Runs the engine over a pre-generated stream into a recorded sink and
/// returns the dispatch log.
pub fn run_engine(
    scenario: &Scenario,
    samples: &[LabeledSample],
    threshold: Threshold,
    refractory_seconds: f64,
) -> Result<Vec<DispatchRecord>, EngineError> {
    let binding = CommandBinding::new("simulation", "Space")?;
    let config = DecisionConfig::new(threshold, scenario.action.clone());
    let mut pipeline = Pipeline::new(config, binding, Emitter::new(refractory_seconds)?);
    let log = DispatchLog::new();
    let mut sink = RecordedSink::new(log.clone());
    for sample in samples {
        let step = pipeline.process(sample)?;
        if let Some(key) = step.key {
            sink.dispatch(&key, sample.time()).expect("recorded sink stays open");
        }
    }
    sink.close();
    Ok(log.snapshot())
}

/// One report per threshold 1..=10, all on the same generated stream.
pub fn sweep_thresholds(scenario: &Scenario) -> Vec<MetricsReport> {
    sweep_thresholds_with(scenario, DEFAULT_REFRACTORY_SECONDS)
        .expect("default refractory and generated timestamps are valid")
}

pub fn sweep_thresholds_with(
    scenario: &Scenario,
    refractory_seconds: f64,
) -> Result<Vec<MetricsReport>, EngineError> {
    let samples = generate_stream(scenario);
    Threshold::all()
        .map(|t| {
            let log = run_engine(scenario, &samples, t, refractory_seconds)?;
            Ok(evaluate_run(scenario, &log, t))
        })
        .collect()
}
