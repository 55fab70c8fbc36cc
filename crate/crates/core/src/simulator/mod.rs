//! Scripted label streams, the mock headset server, and run scoring.

mod metrics;
mod scenario;
mod server;

use thiserror::Error;

pub use metrics::{
    evaluate_run, metrics_csv, run_engine, sweep_thresholds, sweep_thresholds_with, MetricsReport,
    METRICS_CSV_HEADER,
};
pub use scenario::{
    generate_stream, Intent, Scenario, Segment, Span, DEFAULT_ACTION, DEFAULT_RATE_HZ,
};
pub use server::{
    codes, run_mock_server, Direction, EndpointConfig, MockFault, MockOptions, Pacing,
    ServerHandle, Transcript, TranscriptEntry, DEFAULT_TRAINING_DELAY, SIM_HEADSET, SIM_TOKEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario i/o: {0}")]
    Io(String),
    #[error("cannot bind mock server: {0}")]
    Bind(String),
}
