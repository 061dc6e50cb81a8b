use std::fmt;
use std::ops::{Add, Sub};

/// Simulation clock in integer nanoseconds. Integer time keeps slot
/// boundaries and touching frames exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: f64) -> Self {
        SimTime((s * 1e9).round().max(0.0) as u64)
    }

    pub fn from_millis(ms: f64) -> Self {
        SimTime((ms * 1e6).round().max(0.0) as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    /// Smallest multiple of `step` not before `self`.
    pub fn ceil_to(self, step: SimTime) -> SimTime {
        SimTime(self.0.div_ceil(step.0) * step.0)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.as_secs())
    }
}
