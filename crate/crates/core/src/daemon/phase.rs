use std::fmt;

use serde::{Deserialize, Serialize};

/// Lifecycle of the (single) live session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionPhase {
    Idle,
    Connecting,
    Streaming,
    Stopping,
    Faulted,
}

impl SessionPhase {
    /// Idle → Connecting → Streaming → Stopping → Idle, plus an abandoned
    /// connect (Connecting → Stopping), any → Faulted, and Faulted → Idle
    /// on reset.
    pub fn can_transition(self, to: SessionPhase) -> bool {
        use SessionPhase::*;
        matches!(
            (self, to),
            (Idle, Connecting)
                | (Connecting, Streaming)
                | (Connecting, Stopping)
                | (Streaming, Stopping)
                | (Stopping, Idle)
                | (Faulted, Idle)
                | (_, Faulted)
        )
    }

    pub fn is_running(self) -> bool {
        matches!(self, SessionPhase::Connecting | SessionPhase::Streaming)
    }
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::SessionPhase::*;

    #[test]
    fn legal_paths() {
        for (a, b) in [(Idle, Connecting), (Connecting, Streaming), (Streaming, Stopping), (Stopping, Idle)] {
            assert!(a.can_transition(b), "{a} -> {b}");
        }
        assert!(Streaming.can_transition(Faulted));
        assert!(Idle.can_transition(Faulted));
        assert!(Faulted.can_transition(Idle));
        assert!(!Idle.can_transition(Streaming));
        assert!(!Streaming.can_transition(Idle));
        assert!(!Faulted.can_transition(Connecting));
        assert!(!Stopping.can_transition(Streaming));
    }
}
