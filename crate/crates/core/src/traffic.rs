//! Meter populations and their transmission schedules.
//!
//! Default send intervals follow the OMS media profile table: electricity
//! every 7.5 min, gas and district heating every 30 min, hot water and
//! repeaters every 240 min.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::mbus::{Coding, DataRecord, DeviceType, MeterAddress, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    Electricity,
    Gas,
    DistrictHeating,
    HotWater,
    Repeater,
}

impl MeterKind {
    pub const ALL: [MeterKind; 5] = [
        MeterKind::Electricity,
        MeterKind::Gas,
        MeterKind::DistrictHeating,
        MeterKind::HotWater,
        MeterKind::Repeater,
    ];

    /// Scenario-file spelling of the kind.
    pub fn name(self) -> &'static str {
        match self {
            MeterKind::Electricity => "electricity",
            MeterKind::Gas => "gas",
            MeterKind::DistrictHeating => "district_heating",
            MeterKind::HotWater => "hot_water",
            MeterKind::Repeater => "repeater",
        }
    }

    /// Mean send interval in minutes.
    pub fn default_interval_min(self) -> f64 {
        match self {
            MeterKind::Electricity => 7.5,
            MeterKind::Gas | MeterKind::DistrictHeating => 30.0,
            MeterKind::HotWater | MeterKind::Repeater => 240.0,
        }
    }

    /// Provider-side visualisation interval in hours; repeaters have none.
    pub fn provider_window_h(self) -> Option<f64> {
        match self {
            MeterKind::Electricity | MeterKind::Gas | MeterKind::DistrictHeating => Some(1.0),
            MeterKind::HotWater => Some(24.0),
            MeterKind::Repeater => None,
        }
    }

    pub fn device_type(self) -> DeviceType {
        match self {
            MeterKind::Electricity => DeviceType::Electricity,
            MeterKind::Gas => DeviceType::Gas,
            MeterKind::DistrictHeating => DeviceType::Heat,
            MeterKind::HotWater => DeviceType::HotWater,
            MeterKind::Repeater => DeviceType::Repeater,
        }
    }

    /// Profile kind for a wire device type, if it has one.
    pub fn for_device_type(device_type: DeviceType) -> Option<Self> {
        match device_type {
            DeviceType::Electricity => Some(MeterKind::Electricity),
            DeviceType::Gas => Some(MeterKind::Gas),
            DeviceType::Heat => Some(MeterKind::DistrictHeating),
            DeviceType::HotWater => Some(MeterKind::HotWater),
            DeviceType::Repeater => Some(MeterKind::Repeater),
            DeviceType::Other(_) => None,
        }
    }

    /// Typical register contents for a telegram of this medium.
    pub fn default_records(self) -> Vec<DataRecord> {
        let rec = |coding, quantity, scale_exp, value| DataRecord {
            coding,
            quantity,
            scale_exp,
            value,
        };
        match self {
            MeterKind::Electricity => vec![
                rec(Coding::Int32, Quantity::Energy, 0, 1_234_567),
                rec(Coding::Int16, Quantity::Power, 0, 850),
            ],
            MeterKind::Gas => vec![rec(Coding::Bcd8, Quantity::Volume, -3, 456_789)],
            MeterKind::DistrictHeating => vec![
                rec(Coding::Int32, Quantity::Energy, 3, 5_432),
                rec(Coding::Int16, Quantity::Temperature, -1, 652),
            ],
            MeterKind::HotWater => vec![rec(Coding::Int32, Quantity::Volume, -3, 12_345)],
            MeterKind::Repeater => vec![rec(Coding::Int16, Quantity::Temperature, -1, 215)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    Poisson,
    /// Periodic with uniform dither of ±fraction of the interval.
    PeriodicJitter(f64),
}

/// Wireless M-Bus mode. S2/T2 open a response window after every uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    S1,
    T1,
    S2,
    T2,
}

impl Mode {
    pub fn is_bidirectional(self) -> bool {
        matches!(self, Mode::S2 | Mode::T2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterConfig {
    pub kind: MeterKind,
    pub count: u32,
    pub interval_min: f64,
    pub arrival: Arrival,
    pub records_template: Vec<DataRecord>,
    pub mode: Mode,
}

impl MeterConfig {
    pub fn interval_s(&self) -> f64 {
        self.interval_min * 60.0
    }

    /// Human-readable invariant violations; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.count == 0 {
            out.push("count must be at least 1".to_owned());
        }
        if !(self.interval_min > 0.0 && self.interval_min.is_finite()) {
            out.push(format!(
                "interval_min must be > 0, got {}",
                self.interval_min
            ));
        }
        if let Arrival::PeriodicJitter(j) = self.arrival {
            if !(0.0..=1.0).contains(&j) {
                out.push(format!("jitter fraction must be in [0, 1], got {j}"));
            }
        }
        if self.records_template.is_empty() {
            out.push("records_template must hold at least one record".to_owned());
        }
        if self.records_template.len() > crate::mbus::MAX_RECORDS {
            out.push(format!(
                "records_template holds {} records, at most 10 allowed",
                self.records_template.len()
            ));
        }
        for (i, record) in self.records_template.iter().enumerate() {
            if let Err(e) = record.validate() {
                out.push(format!("records_template[{i}]: {e}"));
            }
        }
        out
    }
}

/// Defaults for a medium: mean interval from the profile table, jittered
/// periodic arrivals (±10 %), unidirectional T1 mode.
pub fn default_profile(kind: MeterKind) -> MeterConfig {
    MeterConfig {
        kind,
        count: 1,
        interval_min: kind.default_interval_min(),
        arrival: Arrival::PeriodicJitter(0.1),
        records_template: kind.default_records(),
        mode: Mode::T1,
    }
}

/// Independent random stream for one meter, so draws do not depend on the
/// order in which meters are processed.
pub fn meter_rng(seed: u64, meter_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(meter_index as u64);
    rng
}

/// Gap until the next send after `now`, in seconds. Always positive.
pub fn draw_interval_s<R: Rng + ?Sized>(config: &MeterConfig, rng: &mut R) -> f64 {
    let interval = config.interval_s();
    let gap = match config.arrival {
        Arrival::Poisson => Exp::new(1.0 / interval)
            .expect("interval is positive")
            .sample(rng),
        Arrival::PeriodicJitter(j) if j > 0.0 => interval * (1.0 + rng.random_range(-j..=j)),
        Arrival::PeriodicJitter(_) => interval,
    };
    gap.max(f64::MIN_POSITIVE)
}

/// Offset of a meter's first send. Jittered periodic meters start at a uniform
/// phase within one interval; Poisson meters are memoryless.
pub fn draw_first_offset_s<R: Rng + ?Sized>(config: &MeterConfig, rng: &mut R) -> f64 {
    match config.arrival {
        Arrival::Poisson => draw_interval_s(config, rng),
        Arrival::PeriodicJitter(_) => config.interval_s() * rng.random::<f64>(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeterState {
    pub address: MeterAddress,
    pub next_tx_s: f64,
    pub access_number: u8,
    pub retries_left: u8,
}

impl MeterState {
    pub fn new(address: MeterAddress) -> Self {
        Self {
            address,
            next_tx_s: 0.0,
            access_number: 0,
            retries_left: 0,
        }
    }

    /// Schedule the next send strictly after `now_s` and return its time.
    pub fn next_transmission_time<R: Rng + ?Sized>(
        &mut self,
        config: &MeterConfig,
        now_s: f64,
        rng: &mut R,
    ) -> f64 {
        let next = now_s + draw_interval_s(config, rng);
        self.next_tx_s = if next > now_s { next } else { now_s.next_up() };
        self.next_tx_s
    }

    /// Access number for a new telegram; wraps mod 256.
    pub fn take_access_number(&mut self) -> u8 {
        let n = self.access_number;
        self.access_number = self.access_number.wrapping_add(1);
        n
    }
}

/// Expected fraction of channel time taken by first transmissions.
pub fn offered_load(meters: &[MeterConfig], airtime_s: f64) -> f64 {
    meters
        .iter()
        .map(|m| f64::from(m.count) * airtime_s / m.interval_s())
        .sum()
}
