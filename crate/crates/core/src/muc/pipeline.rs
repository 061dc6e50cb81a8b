//! Scenario → channel simulation → MUC → AMM sink.

use serde::Serialize;

use super::{AmmSink, MucError, MucState, MucStats};
use crate::channel::{run_sim_with, Reception, SimOptions, SimOutput};
use crate::mbus::{encode_telegram, MeterAddress, RawFrame, Telegram};
use crate::obis::ObisReading;
use crate::scenario::Scenario;
use crate::traffic::{MeterConfig, MeterKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterReport {
    pub address: MeterAddress,
    pub kind: MeterKind,
    /// Own telegrams that reached the MUC intact over the direct path.
    pub frames_intact: u64,
    pub readings: u64,
    /// Visualisation outage over the run, when the kind has a provider window
    /// and the run spans at least two of them.
    pub outage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub sim: SimOutput,
    pub muc: MucStats,
    pub meters: Vec<MeterReport>,
    pub readings: Vec<ObisReading>,
}

/// Garble a frame the way an overlapping transmission would, flipping one
/// bit inside the record area so the length field still parses.
pub fn corrupt_frame(mut frame: RawFrame, salt: u64) -> RawFrame {
    let len = frame.0.len();
    let span = len.saturating_sub(14).max(1) as u64;
    let index = (12 + salt % span) as usize;
    if let Some(byte) = frame.0.get_mut(index.min(len.saturating_sub(3))) {
        *byte ^= 1 << (salt % 8);
    }
    frame
}

fn frame_for(
    reception: &Reception,
    address: MeterAddress,
    config: &MeterConfig,
) -> Result<RawFrame, MucError> {
    let telegram = Telegram::data(
        address,
        reception.access_number,
        config.records_template.clone(),
    );
    let frame = encode_telegram(&telegram)?;
    Ok(if reception.intact {
        frame
    } else {
        let salt = u64::from(reception.access_number) * 31 + u64::from(reception.attempt_no);
        corrupt_frame(frame, salt)
    })
}

/// Run the scenario and push everything the MUC hears through it. Collided
/// frames are handed over garbled and rejected by the codec.
pub fn run_pipeline(
    scenario: &Scenario,
    seed: u64,
    options: SimOptions,
    sink: &mut dyn AmmSink,
) -> Result<PipelineOutput, MucError> {
    let mut sim = run_sim_with(
        scenario,
        seed,
        SimOptions {
            record_receptions: true,
            ..options
        },
    )?;
    let slots: Vec<(MeterAddress, &MeterConfig)> = scenario
        .meters
        .iter()
        .flat_map(|group| group.addresses().map(move |a| (a, &group.config)))
        .collect();

    let mut muc = MucState::new(scenario.muc.clone());
    for (address, config) in &slots {
        muc.register_meter(*address, config.interval_s());
    }
    let mut frames_intact = vec![0u64; slots.len()];
    for reception in &sim.receptions {
        let (address, config) = slots[reception.origin];
        if reception.intact && !reception.relayed {
            frames_intact[reception.origin] += 1;
        }
        muc.ingest(&frame_for(reception, address, config)?, reception.time_s);
        muc.flush_to(sink)?;
    }

    let meters = slots
        .iter()
        .zip(frames_intact)
        .map(|((address, config), frames_intact)| MeterReport {
            address: *address,
            kind: config.kind,
            frames_intact,
            readings: muc.known_meters().get(address).map_or(0, |m| m.readings),
            outage: config
                .kind
                .provider_window_h()
                .and_then(|w| muc.outage(address, w, scenario.duration_s).ok()),
        })
        .collect();

    if !options.record_receptions {
        sim.receptions = Vec::new();
    }
    Ok(PipelineOutput {
        sim,
        muc: muc.stats(),
        meters,
        readings: muc.readings().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbus::{decode_telegram, DeviceType, MbusError};
    use crate::muc::MemorySink;
    use crate::traffic::default_profile;

    #[test]
    fn corruption_is_always_caught() {
        let address = MeterAddress::new("OMS", 1, 1, DeviceType::Electricity).unwrap();
        let records = MeterKind::Electricity.default_records();
        let frame = encode_telegram(&Telegram::data(address, 3, records)).unwrap();
        for salt in 0..500 {
            let bad = corrupt_frame(frame.clone(), salt);
            assert_ne!(bad, frame);
            assert!(matches!(
                decode_telegram(&bad),
                Err(MbusError::BadCrc { .. })
            ));
        }
    }

    #[test]
    fn lone_meter_reaches_amm() {
        let scenario = Scenario::new(
            7200.0,
            1,
            Default::default(),
            vec![default_profile(MeterKind::Gas)],
        );
        let mut sink = MemorySink::new();
        let out = run_pipeline(&scenario, 1, SimOptions::default(), &mut sink).unwrap();
        assert!(out.sim.receptions.is_empty());
        let report = &out.meters[0];
        assert!(report.frames_intact >= 3);
        assert_eq!(report.readings, report.frames_intact);
        assert_eq!(report.outage, Some(0.0));
        assert_eq!(sink.len() as u64, report.readings);
        assert!(sink.lines().all(|l| l.contains("\"obis\":\"7-0:3.0.0\"")));
    }
}
