//! The MUC data concentrator: ingests frames heard on the channel, drops
//! repeater duplicates, translates records to OBIS and pushes the result to
//! the AMM back office as newline-delimited messages.

mod message;
mod outage;
mod pipeline;
mod sink;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::mbus::{decode_telegram, Control, MbusError, MeterAddress, RawFrame, Telegram};
use crate::obis::{ObisError, ObisReading};
use crate::scenario::MucConfig;
use crate::traffic::MeterKind;

pub use message::{emit, TertiaryMessage};
pub use outage::visualisation_outage;
pub use pipeline::{corrupt_frame, run_pipeline, MeterReport, PipelineOutput};
pub use sink::{AmmSink, MemorySink, TcpSink};

/// Dedup window for meters of unknown kind: twice the shortest profile interval.
pub const DEFAULT_DEDUP_WINDOW_S: f64 = 2.0 * 7.5 * 60.0;

#[derive(Debug, Error)]
pub enum MucError {
    #[error("horizon of {horizon_s} s is shorter than two {window_s} s windows")]
    HorizonTooShort { horizon_s: f64, window_s: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mbus(#[from] MbusError),
    #[error("AMM sink: {0}")]
    Sink(#[from] std::io::Error),
}

/// Result of offering one frame to the MUC.
#[derive(Debug, Clone, PartialEq)]
pub enum Ingest {
    Accepted(Telegram),
    Duplicate,
    Rejected(MbusError),
}

/// Readings produced from one telegram plus the records that had no OBIS code.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Translation {
    pub readings: Vec<ObisReading>,
    pub skipped: usize,
}

/// One OBIS reading per mappable record; unmappable records are counted, not
/// fatal. Only unsolicited data telegrams carry readings.
pub fn translate(telegram: &Telegram, t_s: f64) -> Translation {
    let mut out = Translation::default();
    if telegram.control != Control::DataUnsolicited {
        return out;
    }
    for record in &telegram.records {
        match ObisReading::from_record(telegram.address, record, t_s) {
            Ok(reading) => out.readings.push(reading),
            Err(ObisError::UnmappedPair { .. }) => out.skipped += 1,
            Err(other) => unreachable!("record already validated by the codec: {other}"),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MucStats {
    pub frames: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub rejected: u64,
    pub readings: u64,
    pub skipped_records: u64,
}

/// What the MUC remembers about a meter.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownMeter {
    pub last_access_number: Option<u8>,
    pub last_seen_s: Option<f64>,
    pub dedup_window_s: f64,
    pub readings: u64,
    recent: VecDeque<(u8, f64)>,
}

impl KnownMeter {
    fn new(dedup_window_s: f64) -> Self {
        Self {
            last_access_number: None,
            last_seen_s: None,
            dedup_window_s,
            readings: 0,
            recent: VecDeque::new(),
        }
    }

    /// Whether `access_number` was already accepted within the window.
    fn seen_recently(&mut self, access_number: u8, t_s: f64) -> bool {
        let window = self.dedup_window_s;
        while self.recent.front().is_some_and(|&(_, t)| t_s - t > window) {
            self.recent.pop_front();
        }
        self.recent.iter().any(|&(n, _)| n == access_number)
    }
}

/// Single-owner concentrator state.
#[derive(Debug, Clone)]
pub struct MucState {
    config: MucConfig,
    known_meters: BTreeMap<MeterAddress, KnownMeter>,
    readings: Vec<ObisReading>,
    outbox: VecDeque<TertiaryMessage>,
    stats: MucStats,
}

impl MucState {
    pub fn new(config: MucConfig) -> Self {
        Self {
            config,
            known_meters: BTreeMap::new(),
            readings: Vec::new(),
            outbox: VecDeque::new(),
            stats: MucStats::default(),
        }
    }

    pub fn config(&self) -> &MucConfig {
        &self.config
    }

    /// Announce a meter and its configured send interval; its dedup window
    /// becomes twice that interval.
    pub fn register_meter(&mut self, address: MeterAddress, interval_s: f64) {
        self.known_meters
            .entry(address)
            .or_insert_with(|| KnownMeter::new(0.0))
            .dedup_window_s = 2.0 * interval_s;
    }

    fn default_window_s(address: &MeterAddress) -> f64 {
        MeterKind::for_device_type(address.device_type).map_or(DEFAULT_DEDUP_WINDOW_S, |kind| {
            2.0 * 60.0 * kind.default_interval_min()
        })
    }

    /// Decode, deduplicate and translate one frame received at `t_s`.
    /// Accepted telegrams queue their messages in the outbox.
    pub fn ingest(&mut self, frame: &RawFrame, t_s: f64) -> Ingest {
        self.stats.frames += 1;
        let telegram = match decode_telegram(frame) {
            Ok(t) => t,
            Err(e) => {
                self.stats.rejected += 1;
                return Ingest::Rejected(e);
            }
        };

        let address = telegram.address;
        let meter = self
            .known_meters
            .entry(address)
            .or_insert_with(|| KnownMeter::new(Self::default_window_s(&address)));
        if self.config.dedup && meter.seen_recently(telegram.access_number, t_s) {
            self.stats.duplicates += 1;
            return Ingest::Duplicate;
        }
        meter.recent.push_back((telegram.access_number, t_s));
        meter.last_access_number = Some(telegram.access_number);
        meter.last_seen_s = Some(t_s);

        let translation = translate(&telegram, t_s);
        meter.readings += translation.readings.len() as u64;
        self.stats.accepted += 1;
        self.stats.readings += translation.readings.len() as u64;
        self.stats.skipped_records += translation.skipped as u64;
        if self.config.service_channel {
            self.outbox.push_back(TertiaryMessage::Raw {
                frame: frame.clone(),
                t_s,
            });
        }
        for reading in translation.readings {
            self.outbox
                .push_back(TertiaryMessage::Reading(reading.clone()));
            self.readings.push(reading);
        }
        Ingest::Accepted(telegram)
    }

    /// Messages awaiting delivery to the AMM, in ingestion order.
    pub fn drain_outbox(&mut self) -> impl Iterator<Item = TertiaryMessage> + '_ {
        self.outbox.drain(..)
    }

    /// Serialise and hand every queued message to `sink`.
    pub fn flush_to(&mut self, sink: &mut dyn AmmSink) -> std::io::Result<()> {
        let name = self.config.name.clone();
        for message in self.outbox.drain(..) {
            sink.deliver(&emit(&name, &message))?;
        }
        Ok(())
    }

    pub fn readings(&self) -> &[ObisReading] {
        &self.readings
    }

    pub fn known_meters(&self) -> &BTreeMap<MeterAddress, KnownMeter> {
        &self.known_meters
    }

    pub fn stats(&self) -> MucStats {
        self.stats
    }

    /// Outage fraction for one meter over `[0, horizon_s)`.
    pub fn outage(
        &self,
        meter: &MeterAddress,
        window_h: f64,
        horizon_s: f64,
    ) -> Result<f64, MucError> {
        visualisation_outage(&self.readings, meter, window_h, horizon_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbus::{encode_telegram, Coding, DataRecord, DeviceType, Quantity};
    use crate::obis::ObisCode;

    fn meter() -> MeterAddress {
        MeterAddress::new("ABC", 12_345_678, 1, DeviceType::Electricity).unwrap()
    }

    fn energy(value: i64) -> DataRecord {
        DataRecord {
            coding: Coding::Int32,
            quantity: Quantity::Energy,
            scale_exp: 0,
            value,
        }
    }

    fn frame(access_number: u8, records: Vec<DataRecord>) -> RawFrame {
        encode_telegram(&Telegram::data(meter(), access_number, records)).unwrap()
    }

    #[test]
    fn fresh_then_repeater_copy() {
        let mut muc = MucState::new(MucConfig::default());
        let f = frame(5, vec![energy(12_345)]);
        assert!(matches!(muc.ingest(&f, 100.0), Ingest::Accepted(_)));
        assert_eq!(muc.ingest(&f, 102.0), Ingest::Duplicate);
        assert_eq!(muc.readings().len(), 1);
        let known = &muc.known_meters()[&meter()];
        assert_eq!(known.last_access_number, Some(5));
        assert_eq!(known.last_seen_s, Some(100.0));
        assert_eq!(known.dedup_window_s, 900.0);
    }

    #[test]
    fn replay_outside_window_is_accepted() {
        let mut muc = MucState::new(MucConfig::default());
        muc.register_meter(meter(), 60.0);
        let f = frame(5, vec![energy(1)]);
        assert!(matches!(muc.ingest(&f, 0.0), Ingest::Accepted(_)));
        assert_eq!(muc.ingest(&f, 119.0), Ingest::Duplicate);
        assert!(matches!(muc.ingest(&f, 240.0), Ingest::Accepted(_)));
        // next access number is never a duplicate
        assert!(matches!(
            muc.ingest(&frame(6, vec![energy(2)]), 241.0),
            Ingest::Accepted(_)
        ));
    }

    #[test]
    fn dedup_can_be_disabled() {
        let config = MucConfig {
            dedup: false,
            ..MucConfig::default()
        };
        let mut muc = MucState::new(config);
        let f = frame(5, vec![energy(1)]);
        muc.ingest(&f, 0.0);
        assert!(matches!(muc.ingest(&f, 1.0), Ingest::Accepted(_)));
        assert_eq!(muc.readings().len(), 2);
    }

    #[test]
    fn corrupted_frame_rejected() {
        let mut muc = MucState::new(MucConfig::default());
        let mut f = frame(5, vec![energy(1)]);
        f.0[13] ^= 0x10;
        assert!(matches!(
            muc.ingest(&f, 0.0),
            Ingest::Rejected(MbusError::BadCrc { .. })
        ));
        assert_eq!(muc.stats().rejected, 1);
        assert!(muc.known_meters().is_empty());
    }

    #[test]
    fn translate_examples() {
        let t = Telegram::data(meter(), 1, vec![energy(7)]);
        let out = translate(&t, 3600.0);
        assert_eq!(out.skipped, 0);
        assert_eq!(out.readings.len(), 1);
        assert_eq!(out.readings[0].code, ObisCode::new(1, 0, 1, 8, 0));

        let volume = DataRecord {
            coding: Coding::Int32,
            quantity: Quantity::Volume,
            scale_exp: -3,
            value: 9,
        };
        let out = translate(&Telegram::data(meter(), 1, vec![energy(7), volume]), 0.0);
        assert_eq!((out.readings.len(), out.skipped), (1, 1));

        assert_eq!(
            translate(&Telegram::ack(meter(), 1), 0.0),
            Translation::default()
        );
    }

    #[test]
    fn outbox_preserves_order_and_service_channel() {
        let config = MucConfig {
            service_channel: true,
            ..MucConfig::default()
        };
        let mut muc = MucState::new(config);
        let power = DataRecord {
            coding: Coding::Int16,
            quantity: Quantity::Power,
            scale_exp: 0,
            value: 850,
        };
        muc.ingest(&frame(1, vec![energy(1), power]), 10.0);
        let kinds: Vec<&str> = muc
            .drain_outbox()
            .map(|m| match m {
                TertiaryMessage::Raw { .. } => "raw",
                TertiaryMessage::Reading(r) => {
                    if r.code.d == 8 {
                        "energy"
                    } else {
                        "power"
                    }
                }
            })
            .collect();
        assert_eq!(kinds, ["raw", "energy", "power"]);
        assert_eq!(muc.drain_outbox().count(), 0);
    }
}
