//! Scenario files: a meter population, channel parameters and MUC settings
//! in one JSON document.
//!
//! ```json
//! {
//!   "duration_s": 86400,
//!   "seed": 7,
//!   "channel": { "airtime_ms": 10, "cca_turnaround_ms": 1, "policy": "pure-aloha",
//!                "ack": { "enabled": false } },
//!   "meters": [ { "kind": "electricity" },
//!               { "kind": "gas", "count": 20, "arrival": "poisson", "mode": "T2" } ],
//!   "muc": { "name": "MUC-1", "dedup": true }
//! }
//! ```
//!
//! Omitted meter fields take the medium's default profile. Unknown keys are
//! rejected.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::mbus::{DataRecord, Manufacturer, MeterAddress, MAX_IDENT};
use crate::traffic::{default_profile, offered_load, Arrival, MeterConfig, MeterKind, Mode};

pub const DEFAULT_MANUFACTURER: &str = "OMS";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MucConfig {
    #[serde(default = "default_muc_name")]
    pub name: String,
    #[serde(default = "default_true")]
    pub dedup: bool,
    /// Also forward every accepted frame as hex on the service channel.
    #[serde(default)]
    pub service_channel: bool,
    /// `host:port` of an AMM listener for the tertiary line protocol.
    #[serde(default)]
    pub tcp_emit: Option<String>,
}

fn default_muc_name() -> String {
    "MUC-1".to_owned()
}

fn default_true() -> bool {
    true
}

impl Default for MucConfig {
    fn default() -> Self {
        Self {
            name: default_muc_name(),
            dedup: true,
            service_channel: false,
            tcp_emit: None,
        }
    }
}

/// A meter configuration plus the addresses its meters are given.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterGroup {
    pub config: MeterConfig,
    pub manufacturer: Manufacturer,
    pub first_ident: u32,
}

impl MeterGroup {
    pub fn addresses(&self) -> impl Iterator<Item = MeterAddress> + '_ {
        (0..self.config.count).map(move |i| MeterAddress {
            manufacturer: self.manufacturer,
            ident: self.first_ident + i,
            version: 1,
            device_type: self.config.kind.device_type(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration_s: f64,
    pub seed: u64,
    pub channel: ChannelParams,
    pub meters: Vec<MeterGroup>,
    pub muc: MucConfig,
}

impl Scenario {
    /// Build a scenario with sequential default addressing.
    pub fn new(
        duration_s: f64,
        seed: u64,
        channel: ChannelParams,
        configs: Vec<MeterConfig>,
    ) -> Self {
        let manufacturer = Manufacturer::new(DEFAULT_MANUFACTURER).expect("valid default");
        let mut next_ident = 1u32;
        let meters = configs
            .into_iter()
            .map(|config| {
                let first_ident = next_ident;
                next_ident = next_ident.saturating_add(config.count);
                MeterGroup {
                    config,
                    manufacturer,
                    first_ident,
                }
            })
            .collect();
        Self {
            duration_s,
            seed,
            channel,
            meters,
            muc: MucConfig::default(),
        }
    }

    pub fn meter_count(&self) -> usize {
        self.meters.iter().map(|g| g.config.count as usize).sum()
    }

    /// Offered load of first transmissions across all meters.
    pub fn offered_load(&self) -> f64 {
        let configs: Vec<MeterConfig> = self.meters.iter().map(|g| g.config.clone()).collect();
        offered_load(&configs, self.channel.airtime_ms / 1e3)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            out.push(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if self.meters.is_empty() {
            out.push("at least one meter group is required".to_owned());
        }
        out.extend(
            self.channel
                .violations()
                .into_iter()
                .map(|v| format!("channel: {v}")),
        );

        let mut seen = HashSet::new();
        for (i, group) in self.meters.iter().enumerate() {
            out.extend(
                group
                    .config
                    .violations()
                    .into_iter()
                    .map(|v| format!("meters[{i}]: {v}")),
            );
            let last = u64::from(group.first_ident) + u64::from(group.config.count.max(1)) - 1;
            if last > u64::from(MAX_IDENT) {
                out.push(format!(
                    "meters[{i}]: identification numbers run past 99999999"
                ));
                continue;
            }
            for address in group.addresses() {
                if !seen.insert((address.manufacturer, address.ident)) {
                    out.push(format!("meters[{i}]: duplicate meter address {address}"));
                    break;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Validation(violations))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    duration_s: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    channel: ChannelParams,
    meters: Vec<MeterFile>,
    #[serde(default)]
    muc: MucConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeterFile {
    kind: MeterKind,
    #[serde(default)]
    count: Option<u32>,
    #[serde(default)]
    interval_min: Option<f64>,
    #[serde(default)]
    arrival: Option<Arrival>,
    #[serde(default)]
    records_template: Option<Vec<DataRecord>>,
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    manufacturer: Option<String>,
    #[serde(default)]
    first_ident: Option<u32>,
}

/// Parse and fully validate a scenario document.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut violations = Vec::new();
    let mut next_ident = 1u32;
    let mut meters = Vec::with_capacity(file.meters.len());
    for (i, m) in file.meters.into_iter().enumerate() {
        let defaults = default_profile(m.kind);
        let config = MeterConfig {
            kind: m.kind,
            count: m.count.unwrap_or(defaults.count),
            interval_min: m.interval_min.unwrap_or(defaults.interval_min),
            arrival: m.arrival.unwrap_or(defaults.arrival),
            records_template: m.records_template.unwrap_or(defaults.records_template),
            mode: m.mode.unwrap_or(defaults.mode),
        };
        let manufacturer =
            match Manufacturer::new(m.manufacturer.as_deref().unwrap_or(DEFAULT_MANUFACTURER)) {
                Ok(code) => code,
                Err(e) => {
                    violations.push(format!("meters[{i}]: {e}"));
                    Manufacturer::new(DEFAULT_MANUFACTURER).expect("valid default")
                }
            };
        let first_ident = m.first_ident.unwrap_or(next_ident);
        next_ident = first_ident.saturating_add(config.count);
        meters.push(MeterGroup {
            config,
            manufacturer,
            first_ident,
        });
    }

    let scenario = Scenario {
        duration_s: file.duration_s,
        seed: file.seed,
        channel: file.channel,
        meters,
        muc: file.muc,
    };
    violations.extend(scenario.violations());
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(violations))
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::AccessPolicy;
    use crate::mbus::DeviceType;

    const FOUR_METERS: &str = r#"{
        "duration_s": 86400,
        "seed": 42,
        "channel": { "airtime_ms": 10, "cca_turnaround_ms": 1, "policy": "pure-aloha" },
        "meters": [
            { "kind": "electricity", "manufacturer": "ELS", "first_ident": 10000001 },
            { "kind": "gas", "manufacturer": "GWF", "first_ident": 20000001 },
            { "kind": "district_heating", "manufacturer": "KAM", "first_ident": 30000001 },
            { "kind": "hot_water", "manufacturer": "ZRI", "first_ident": 40000001 }
        ]
    }"#;

    #[test]
    fn four_meter_file() {
        let s = parse_scenario_str(FOUR_METERS).unwrap();
        assert_eq!(s.meter_count(), 4);
        assert_eq!(s.seed, 42);
        assert_eq!(s.channel.policy, AccessPolicy::PureAloha);
        let intervals: Vec<f64> = s.meters.iter().map(|g| g.config.interval_min).collect();
        assert_eq!(intervals, [7.5, 30.0, 30.0, 240.0]);
        let first = s.meters[2].addresses().next().unwrap();
        assert_eq!(first.to_string(), "KAM/30000001");
        assert_eq!(first.device_type, DeviceType::Heat);
        assert_eq!(s.muc, MucConfig::default());
    }

    #[test]
    fn zero_interval_is_validation_error() {
        let text = FOUR_METERS.replace(r#""kind": "gas","#, r#""kind": "gas", "interval_min": 0,"#);
        match parse_scenario_str(&text) {
            Err(ScenarioError::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].contains("interval_min"), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_parse_error() {
        let text = FOUR_METERS.replace(r#""seed": 42,"#, r#""seed": 42, "speed": 3,"#);
        match parse_scenario_str(&text) {
            Err(ScenarioError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("speed"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = FOUR_METERS.replace(r#"{ "kind": "gas","#, r#"{ "kind": "gas", "colour": 1,"#);
        assert!(matches!(
            parse_scenario_str(&text),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn all_violations_listed() {
        let text = r#"{
            "duration_s": -1,
            "channel": { "airtime_ms": 10, "cca_turnaround_ms": 20, "policy": "csma-ca" },
            "meters": [
                { "kind": "gas", "count": 0, "manufacturer": "gw1" },
                { "kind": "gas", "first_ident": 99999999, "count": 2 }
            ]
        }"#;
        let Err(ScenarioError::Validation(v)) = parse_scenario_str(text) else {
            panic!()
        };
        assert_eq!(v.len(), 5, "{v:#?}");
    }

    #[test]
    fn duplicate_addresses_rejected() {
        let text = r#"{ "duration_s": 10, "meters": [
            { "kind": "gas", "first_ident": 5, "count": 3 },
            { "kind": "gas", "first_ident": 7 } ] }"#;
        let Err(ScenarioError::Validation(v)) = parse_scenario_str(text) else {
            panic!()
        };
        assert!(v[0].contains("duplicate"), "{v:?}");
    }

    #[test]
    fn programmatic_addressing_is_sequential() {
        let mut gas = default_profile(MeterKind::Gas);
        gas.count = 3;
        let s = Scenario::new(
            10.0,
            0,
            ChannelParams::default(),
            vec![gas, default_profile(MeterKind::HotWater)],
        );
        assert!(s.violations().is_empty());
        assert_eq!(s.meters[1].first_ident, 4);
    }
}
