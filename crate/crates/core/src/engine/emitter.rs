use super::EngineError;

/// Default minimum spacing between activations, in seconds.
pub const DEFAULT_REFRACTORY_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationEvent {
    pub time: f64,
}

/// Turns the level-valued decision signal into discrete activations: one per
/// rising edge, and never two within the refractory period.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    active: bool,
    last_emit: Option<f64>,
    last_now: Option<f64>,
    refractory: f64,
}

impl Default for Emitter {
    fn default() -> Self {
        Self::new(DEFAULT_REFRACTORY_SECONDS).expect("default refractory is valid")
    }
}

impl Emitter {
    pub fn new(refractory_seconds: f64) -> Result<Self, EngineError> {
        if !(refractory_seconds >= 0.0 && refractory_seconds.is_finite()) {
            return Err(EngineError::InvalidRefractory(refractory_seconds));
        }
        Ok(Self {
            active: false,
            last_emit: None,
            last_now: None,
            refractory: refractory_seconds,
        })
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn last_emit(&self) -> Option<f64> {
        self.last_emit
    }

    pub fn refractory(&self) -> f64 {
        self.refractory
    }

    /// Fails with `ClockRegression` (leaving the state untouched) if `now`
    /// is earlier than the previous call's.
    pub fn step(&mut self, decision: bool, now: f64) -> Result<Option<ActivationEvent>, EngineError> {
        if let Some(prev) = self.last_now {
            if now < prev {
                return Err(EngineError::ClockRegression { previous: prev, now });
            }
        }
        self.last_now = Some(now);

        let rising = decision && !self.active;
        self.active = decision;
        let rested = self.last_emit.is_none_or(|t| now - t >= self.refractory);
        if rising && rested {
            self.last_emit = Some(now);
            Ok(Some(ActivationEvent { time: now }))
        } else {
            Ok(None)
        }
    }
}
