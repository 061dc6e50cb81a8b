//! Shared radio channel: access policies, a discrete-event simulator and the
//! closed-form throughput curves it is checked against.

mod analytic;
mod outcome;
mod sim;
mod sweep;
mod time;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analytic::{analytic_np_csma, analytic_pure_aloha, analytic_slotted_aloha};
pub use outcome::detect_outcomes;
pub use sim::{
    run_sim, run_sim_with, write_event_log, LogEntry, LogEvent, Reception, SimOptions, SimOutput,
    WARMUP_FRACTION,
};
pub use sweep::{
    sweep, sweep_sequential, sweep_with, GridSpec, SweepConfig, ThroughputPoint,
    DEFAULT_SWEEP_METERS,
};
pub use time::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessPolicy {
    PureAloha,
    SlottedAloha,
    CsmaCa,
}

impl AccessPolicy {
    pub const ALL: [AccessPolicy; 3] = [
        AccessPolicy::PureAloha,
        AccessPolicy::SlottedAloha,
        AccessPolicy::CsmaCa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AccessPolicy::PureAloha => "pure-aloha",
            AccessPolicy::SlottedAloha => "slotted-aloha",
            AccessPolicy::CsmaCa => "csma-ca",
        }
    }

    /// Closed-form throughput at load `g`; `a` is τ/m and only used by CSMA.
    pub fn analytic(self, g: f64, a: f64) -> f64 {
        match self {
            AccessPolicy::PureAloha => analytic_pure_aloha(g),
            AccessPolicy::SlottedAloha => analytic_slotted_aloha(g),
            AccessPolicy::CsmaCa => analytic_np_csma(g, a),
        }
    }
}

impl std::str::FromStr for AccessPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown policy {s:?}, expected pure-aloha, slotted-aloha or csma-ca")
            })
    }
}

/// Response-window settings for bidirectional (S2/T2) meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AckParams {
    pub enabled: bool,
    pub timeout_ms: f64,
    pub max_retries: u8,
    /// Upper bound of the uniform retry / CCA deferral delay.
    pub backoff_window_ms: f64,
    /// Downlink ACK duration; ACKs never collide.
    pub airtime_ms: f64,
}

impl Default for AckParams {
    fn default() -> Self {
        Self {
            enabled: false,
            timeout_ms: 50.0,
            max_retries: 3,
            backoff_window_ms: 1000.0,
            airtime_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Telegram duration m.
    pub airtime_ms: f64,
    /// Slot length for slotted Aloha; defaults to the airtime.
    pub slot_ms: Option<f64>,
    /// CCA sensing/turnaround delay τ.
    pub cca_turnaround_ms: f64,
    pub policy: AccessPolicy,
    pub ack: AckParams,
    /// Delay before a repeater rebroadcasts a frame it heard.
    pub repeater_delay_ms: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            airtime_ms: 10.0,
            slot_ms: None,
            cca_turnaround_ms: 1.0,
            policy: AccessPolicy::PureAloha,
            ack: AckParams::default(),
            repeater_delay_ms: 50.0,
        }
    }
}

impl ChannelParams {
    pub fn with_policy(policy: AccessPolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }

    pub fn slot_ms(&self) -> f64 {
        self.slot_ms.unwrap_or(self.airtime_ms)
    }

    /// Normalised sensing delay a = τ/m.
    pub fn a(&self) -> f64 {
        self.cca_turnaround_ms / self.airtime_ms
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !positive(self.airtime_ms) {
            out.push(format!("airtime_ms must be > 0, got {}", self.airtime_ms));
        }
        if !positive(self.slot_ms()) {
            out.push(format!("slot_ms must be > 0, got {}", self.slot_ms()));
        }
        if !non_negative(self.cca_turnaround_ms) {
            out.push(format!(
                "cca_turnaround_ms must be >= 0, got {}",
                self.cca_turnaround_ms
            ));
        } else if self.policy == AccessPolicy::CsmaCa && self.cca_turnaround_ms >= self.airtime_ms {
            out.push(format!(
                "cca_turnaround_ms ({}) must be below airtime_ms ({}) for csma-ca",
                self.cca_turnaround_ms, self.airtime_ms
            ));
        }
        if !non_negative(self.ack.timeout_ms) {
            out.push(format!(
                "ack.timeout_ms must be >= 0, got {}",
                self.ack.timeout_ms
            ));
        }
        if !positive(self.ack.backoff_window_ms) {
            out.push(format!(
                "ack.backoff_window_ms must be > 0, got {}",
                self.ack.backoff_window_ms
            ));
        }
        if !non_negative(self.ack.airtime_ms) {
            out.push(format!(
                "ack.airtime_ms must be >= 0, got {}",
                self.ack.airtime_ms
            ));
        }
        if !non_negative(self.repeater_delay_ms) {
            out.push(format!(
                "repeater_delay_ms must be >= 0, got {}",
                self.repeater_delay_ms
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    Collided,
    /// CCA found the channel busy; nothing was sent.
    Deferred,
    /// Collided on the last permitted attempt.
    Dropped,
}

/// One channel access by a meter. Deferred accesses carry the interval the
/// frame would have occupied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxAttempt {
    pub meter: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub attempt_no: u32,
    pub outcome: Outcome,
}

/// Channel metrics over the measurement window (after warm-up).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Offered load of first transmissions, from the traffic model.
    pub g_offered: f64,
    /// Transmitted airtime / window, retransmissions included.
    pub g_measured: f64,
    /// Channel-access attempts (transmissions plus CCA deferrals) × airtime / window.
    pub g_access: f64,
    /// Successfully delivered airtime / window.
    pub s_throughput: f64,
    /// Batch-means standard error of `s_throughput`.
    pub s_std_error: f64,
    pub pdr: f64,
    pub transmissions: u64,
    pub delivered: u64,
    pub collisions: u64,
    pub retransmissions: u64,
    pub deferrals: u64,
    pub drops: u64,
    pub packets: u64,
    pub mean_delivery_delay_s: f64,
    pub window_s: f64,
}
