//! Visualisation outage: how often the provider sees nothing from a meter for
//! a whole display window.

use super::MucError;
use crate::mbus::MeterAddress;
use crate::obis::ObisReading;

/// Fraction of the consecutive windows `[k·w, (k+1)·w)` inside `[0, horizon_s)`
/// that hold no reading from `meter`.
pub fn visualisation_outage(
    readings: &[ObisReading],
    meter: &MeterAddress,
    window_h: f64,
    horizon_s: f64,
) -> Result<f64, MucError> {
    let window_s = window_h * 3600.0;
    if !(window_s > 0.0 && horizon_s >= 2.0 * window_s) {
        return Err(MucError::HorizonTooShort {
            horizon_s,
            window_s,
        });
    }
    let windows = (horizon_s / window_s).floor() as usize;
    let mut covered = vec![false; windows];
    for r in readings.iter().filter(|r| r.meter == *meter) {
        if r.timestamp_s >= 0.0 {
            let k = (r.timestamp_s / window_s) as usize;
            if let Some(slot) = covered.get_mut(k) {
                *slot = true;
            }
        }
    }
    let empty = covered.iter().filter(|&&c| !c).count();
    Ok(empty as f64 / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbus::DeviceType;
    use crate::obis::{ObisCode, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meter() -> MeterAddress {
        MeterAddress::new("OMS", 1, 1, DeviceType::Electricity).unwrap()
    }

    fn reading_at(t: f64) -> ObisReading {
        ObisReading {
            code: ObisCode::new(1, 0, 1, 8, 0),
            value: 0,
            scale_exp: 0,
            unit: Unit::Wh,
            meter: meter(),
            timestamp_s: t,
        }
    }

    /// Periodic 7.5-min sends at phase 225 s, each delivered with probability `p`.
    fn bernoulli_readings(p: f64, hours: usize, rng: &mut ChaCha8Rng) -> Vec<ObisReading> {
        (0..hours * 8)
            .map(|i| 225.0 + 450.0 * i as f64)
            .filter(|_| rng.random::<f64>() < p)
            .map(reading_at)
            .collect()
    }

    #[test]
    fn full_delivery_has_no_outage() {
        let readings = bernoulli_readings(1.0, 24, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(
            visualisation_outage(&readings, &meter(), 1.0, 86_400.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn silent_meter_is_always_out() {
        let readings = [reading_at(10.0), reading_at(3700.0)];
        assert_eq!(
            visualisation_outage(&readings, &meter(), 1.0, 7200.0).unwrap(),
            0.0
        );
        let stranger = MeterAddress::new("OMS", 2, 1, DeviceType::Electricity).unwrap();
        assert_eq!(
            visualisation_outage(&readings, &stranger, 1.0, 7200.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn short_horizon_rejected() {
        assert!(matches!(
            visualisation_outage(&[], &meter(), 1.0, 7199.0),
            Err(MucError::HorizonTooShort { .. })
        ));
        assert!(visualisation_outage(&[], &meter(), 1.0, 7200.0).is_ok());
    }

    #[test]
    fn partial_last_window_ignored() {
        // 2.5 windows: only the two complete ones count
        let readings = [reading_at(100.0)];
        assert_eq!(
            visualisation_outage(&readings, &meter(), 1.0, 9000.0).unwrap(),
            0.5
        );
    }

    #[test]
    fn matches_independent_loss_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hours = 20_000;
        for p in [0.3, 0.5, 0.7] {
            let readings = bernoulli_readings(p, hours, &mut rng);
            let outage =
                visualisation_outage(&readings, &meter(), 1.0, hours as f64 * 3600.0).unwrap();
            let expected = (1.0 - p).powi(8);
            let se = (expected * (1.0 - expected) / hours as f64).sqrt();
            assert!(
                (outage - expected).abs() < 3.0 * se,
                "p={p}: {outage} vs {expected} ± {se}"
            );
        }
    }
}
