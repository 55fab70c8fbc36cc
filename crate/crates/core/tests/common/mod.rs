#![allow(dead_code)]

use std::time::Duration;

use bridge_core::daemon::{
    Daemon, DaemonConfig, DispatchClock, ProfileRecord, ProfileStore, SessionPhase, SinkKind,
    StatusEvent, StatusSubscription,
};
use bridge_core::engine::{CommandBinding, TaskName, Threshold};
use bridge_core::simulator::{
    run_mock_server, EndpointConfig, Intent, MockOptions, Pacing, Scenario, Segment, ServerHandle,
};

pub const WAIT: Duration = Duration::from_secs(20);

pub fn profile(name: &str, trained: bool) -> ProfileRecord {
    ProfileRecord {
        name: name.into(),
        task_name: TaskName::new("push").unwrap(),
        binding: CommandBinding::new("youtube", "Space").unwrap(),
        default_threshold: Threshold::new(5).unwrap(),
        trained,
    }
}

pub fn clean(segments: &[(Intent, f64)], rate_hz: f64) -> Scenario {
    let segs = segments.iter().map(|&(i, d)| Segment::clean(i, d)).collect();
    let mut s = Scenario::new("clean", 1, segs).unwrap();
    s.rate_hz = rate_hz;
    s.validate().unwrap();
    s
}

pub async fn mock(scenario: Scenario, options: MockOptions) -> ServerHandle {
    run_mock_server(scenario, &EndpointConfig::ephemeral(), options).await.unwrap()
}

pub fn paced() -> MockOptions {
    MockOptions { pacing: Pacing::Paced, ..MockOptions::accelerated() }
}

pub fn config(url: &str, clock: DispatchClock) -> DaemonConfig {
    DaemonConfig {
        cortex_url: url.to_string(),
        sink: SinkKind::Recorded,
        dispatch_clock: clock,
        ..DaemonConfig::default()
    }
}

/// Daemon with an in-memory store holding a trained "alex" (push → Space).
pub fn daemon(url: &str, clock: DispatchClock) -> Daemon {
    let mut store = ProfileStore::in_memory();
    store.put(profile("alex", true), false).unwrap();
    Daemon::new(config(url, clock), store)
}

/// Collects events until one satisfies `stop` (inclusive).
pub async fn collect_until(
    sub: &mut StatusSubscription,
    stop: impl Fn(&StatusEvent) -> bool,
) -> Vec<StatusEvent> {
    let mut out = Vec::new();
    let fut = async {
        while let Some(ev) = sub.recv().await {
            let done = stop(&ev);
            out.push(ev);
            if done {
                break;
            }
        }
    };
    tokio::time::timeout(WAIT, fut).await.expect("status stream stalled");
    out
}

pub fn settled(ev: &StatusEvent) -> bool {
    matches!(ev.phase, SessionPhase::Idle | SessionPhase::Faulted) && !ev.message.starts_with("training")
}

/// Distinct phases in emission order.
pub fn phase_path(events: &[StatusEvent]) -> Vec<SessionPhase> {
    let mut path: Vec<SessionPhase> = Vec::new();
    for ev in events {
        if path.last() != Some(&ev.phase) {
            path.push(ev.phase);
        }
    }
    path
}

/// Trailing-ten recount over a neutral-prefilled history.
pub fn recount(labels: &[bool], index: usize) -> usize {
    let lo = (index + 1).saturating_sub(10);
    labels[lo..=index].iter().filter(|&&b| b).count()
}

/// Per-sample count events (the ones the daemon emits for every sample).
pub fn sample_counts(events: &[StatusEvent]) -> Vec<(u8, u8)> {
    events
        .iter()
        .filter(|e| e.message.starts_with("positive:"))
        .map(|e| {
            let c = e.counts.expect("streaming event carries counts");
            (c.n_positive, c.n_negative)
        })
        .collect()
}
