use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use super::phase::SessionPhase;
use crate::engine::WindowCounts;

const STATUS_CHANNEL_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub n_positive: u8,
    pub n_negative: u8,
}

impl From<WindowCounts> for Counts {
    fn from(c: WindowCounts) -> Self {
        Self { n_positive: c.n_positive, n_negative: c.n_negative }
    }
}

/// One status-bar message. `counts` is present exactly while streaming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEvent {
    /// Seconds since daemon start.
    pub time: f64,
    pub level: Level,
    pub message: String,
    pub phase: SessionPhase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Counts>,
}

/// Fan-out of status events to any number of subscribers.
#[derive(Debug, Clone)]
pub struct StatusBus {
    tx: broadcast::Sender<StatusEvent>,
}

impl Default for StatusBus {
    fn default() -> Self {
        Self::new()
    }
}

impl StatusBus {
    pub fn new() -> Self {
        let (tx, _) = broadcast::channel(STATUS_CHANNEL_CAPACITY);
        Self { tx }
    }

    pub fn publish(&self, event: StatusEvent) {
        tracing::debug!(level = ?event.level, phase = %event.phase, "{}", event.message);
        // No subscribers is fine.
        let _ = self.tx.send(event);
    }

    pub fn subscribe(&self) -> StatusSubscription {
        StatusSubscription { rx: self.tx.subscribe(), last: None }
    }
}

pub struct StatusSubscription {
    rx: broadcast::Receiver<StatusEvent>,
    last: Option<StatusEvent>,
}

impl StatusSubscription {
    /// Next event in emission order; `None` once the daemon is gone. A
    /// subscriber that fell behind gets a warn event noting how many of the
    /// oldest events were dropped.
    pub async fn recv(&mut self) -> Option<StatusEvent> {
        let got = self.rx.recv().await;
        match got {
            Ok(ev) => Some(self.seen(ev)),
            Err(broadcast::error::RecvError::Closed) => None,
            Err(broadcast::error::RecvError::Lagged(n)) => Some(self.dropped(n)),
        }
    }

    /// Non-blocking variant of [`recv`](Self::recv).
    pub fn try_recv(&mut self) -> Option<StatusEvent> {
        match self.rx.try_recv() {
            Ok(ev) => Some(self.seen(ev)),
            Err(broadcast::error::TryRecvError::Lagged(n)) => Some(self.dropped(n)),
            Err(_) => None,
        }
    }

    fn seen(&mut self, ev: StatusEvent) -> StatusEvent {
        self.last = Some(ev.clone());
        ev
    }

    // Carries the last seen phase and counts so the lag notice does not
    // fake a phase change.
    fn dropped(&self, n: u64) -> StatusEvent {
        let (time, phase, counts) = match &self.last {
            Some(l) => (l.time, l.phase, l.counts),
            None => (0.0, SessionPhase::Idle, None),
        };
        StatusEvent {
            time,
            level: Level::Warn,
            message: format!("status subscriber fell behind; dropped {n} events"),
            phase,
            counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(phase: SessionPhase, counts: Option<Counts>) -> StatusEvent {
        StatusEvent { time: 1.5, level: Level::Info, message: "m".into(), phase, counts }
    }

    #[test]
    fn json_shape() {
        let ev = event(SessionPhase::Streaming, Some(Counts { n_positive: 7, n_negative: 3 }));
        assert_eq!(
            serde_json::to_string(&ev).unwrap(),
            r#"{"time":1.5,"level":"info","message":"m","phase":"Streaming","counts":{"nPositive":7,"nNegative":3}}"#
        );
        let idle = serde_json::to_value(event(SessionPhase::Idle, None)).unwrap();
        assert!(idle.get("counts").is_none());
    }

    #[test]
    fn lag_notice_keeps_last_phase() {
        let bus = StatusBus::new();
        let mut sub = bus.subscribe();
        let streaming = event(SessionPhase::Streaming, Some(Counts { n_positive: 1, n_negative: 9 }));
        bus.publish(streaming.clone());
        assert_eq!(sub.try_recv(), Some(streaming));
        for _ in 0..STATUS_CHANNEL_CAPACITY + 5 {
            bus.publish(event(SessionPhase::Streaming, Some(Counts { n_positive: 2, n_negative: 8 })));
        }
        let notice = sub.try_recv().unwrap();
        assert_eq!(notice.level, Level::Warn);
        assert_eq!(notice.phase, SessionPhase::Streaming);
        assert_eq!(notice.counts, Some(Counts { n_positive: 1, n_negative: 9 }));
        assert!(notice.message.contains("dropped 5"));
    }
}
