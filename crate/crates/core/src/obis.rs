//! OBIS value-group codes and the M-Bus → OBIS translation table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mbus::{decode_vif, DataRecord, DeviceType, MeterAddress, Quantity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObisError {
    #[error("unknown VIF {0:#04x}")]
    UnknownVif(u8),
    #[error("no OBIS code for {quantity:?} on a {device_type:?} meter")]
    UnmappedPair {
        device_type: DeviceType,
        quantity: Quantity,
    },
    #[error("malformed OBIS code {0:?}: expected A-B:C.D.E")]
    MalformedObis(String),
}

/// OBIS identifier without the F group, displayed as `A-B:C.D.E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ObisCode {
    pub a: u8,
    pub b: u8,
    pub c: u8,
    pub d: u8,
    pub e: u8,
}

impl ObisCode {
    pub const fn new(a: u8, b: u8, c: u8, d: u8, e: u8) -> Self {
        Self { a, b, c, d, e }
    }
}

impl fmt::Display for ObisCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}:{}.{}.{}", self.a, self.b, self.c, self.d, self.e)
    }
}

impl FromStr for ObisCode {
    type Err = ObisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || ObisError::MalformedObis(s.to_owned());
        let group = |g: &str| -> Result<u8, ObisError> {
            if g.is_empty() || g.len() > 3 || !g.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            g.parse().map_err(|_| malformed())
        };
        let (a, rest) = s.split_once('-').ok_or_else(malformed)?;
        let (b, rest) = rest.split_once(':').ok_or_else(malformed)?;
        let mut cde = rest.split('.');
        let (Some(c), Some(d), Some(e), None) = (cde.next(), cde.next(), cde.next(), cde.next())
        else {
            return Err(malformed());
        };
        Ok(Self::new(
            group(a)?,
            group(b)?,
            group(c)?,
            group(d)?,
            group(e)?,
        ))
    }
}

pub fn format_obis(code: ObisCode) -> String {
    code.to_string()
}

pub fn parse_obis(s: &str) -> Result<ObisCode, ObisError> {
    s.parse()
}

impl TryFrom<String> for ObisCode {
    type Error = ObisError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ObisCode> for String {
    fn from(code: ObisCode) -> Self {
        code.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Wh,
    #[serde(rename = "m3")]
    CubicMetre,
    W,
    Celsius,
}

impl Unit {
    pub fn for_quantity(quantity: Quantity) -> Self {
        match quantity {
            Quantity::Energy => Unit::Wh,
            Quantity::Volume => Unit::CubicMetre,
            Quantity::Power => Unit::W,
            Quantity::Temperature => Unit::Celsius,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Wh => "Wh",
            Unit::CubicMetre => "m3",
            Unit::W => "W",
            Unit::Celsius => "Celsius",
        }
    }
}

/// Quantity, unit and decimal exponent of a VIF byte.
pub fn vif_decode(vif: u8) -> Result<(Quantity, Unit, i8), ObisError> {
    let (quantity, scale_exp) = decode_vif(vif).map_err(|_| ObisError::UnknownVif(vif))?;
    Ok((quantity, Unit::for_quantity(quantity), scale_exp))
}

pub fn map_to_obis(device_type: DeviceType, quantity: Quantity) -> Result<ObisCode, ObisError> {
    use DeviceType::*;
    use Quantity::*;
    match (device_type, quantity) {
        (_, Temperature) => Ok(ObisCode::new(0, 0, 96, 9, 0)),
        (Electricity, Energy) => Ok(ObisCode::new(1, 0, 1, 8, 0)),
        (Electricity, Power) => Ok(ObisCode::new(1, 0, 1, 7, 0)),
        (Gas, Volume) => Ok(ObisCode::new(7, 0, 3, 0, 0)),
        (Heat, Energy) => Ok(ObisCode::new(6, 0, 1, 0, 0)),
        (HotWater, Volume) => Ok(ObisCode::new(9, 0, 1, 0, 0)),
        _ => Err(ObisError::UnmappedPair {
            device_type,
            quantity,
        }),
    }
}

/// A data record after MUC translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObisReading {
    pub code: ObisCode,
    pub value: i64,
    pub scale_exp: i8,
    pub unit: Unit,
    pub meter: MeterAddress,
    pub timestamp_s: f64,
}

impl ObisReading {
    pub fn from_record(
        meter: MeterAddress,
        record: &DataRecord,
        timestamp_s: f64,
    ) -> Result<Self, ObisError> {
        Ok(Self {
            code: map_to_obis(meter.device_type, record.quantity)?,
            value: record.value,
            scale_exp: record.scale_exp,
            unit: Unit::for_quantity(record.quantity),
            meter,
            // millisecond resolution
            timestamp_s: (timestamp_s * 1e3).round() / 1e3,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbus::{encode_vif, Coding};
    use proptest::prelude::*;

    #[test]
    fn vif_examples() {
        assert_eq!(vif_decode(0x03), Ok((Quantity::Energy, Unit::Wh, 0)));
        assert_eq!(
            vif_decode(0x13),
            Ok((Quantity::Volume, Unit::CubicMetre, -3))
        );
        assert_eq!(vif_decode(0xFF), Err(ObisError::UnknownVif(0xFF)));
    }

    #[test]
    fn mapping_examples() {
        assert_eq!(
            map_to_obis(DeviceType::Electricity, Quantity::Energy)
                .unwrap()
                .to_string(),
            "1-0:1.8.0"
        );
        assert_eq!(
            map_to_obis(DeviceType::Gas, Quantity::Volume)
                .unwrap()
                .to_string(),
            "7-0:3.0.0"
        );
        assert!(matches!(
            map_to_obis(DeviceType::Gas, Quantity::Power),
            Err(ObisError::UnmappedPair { .. })
        ));
        assert_eq!(
            map_to_obis(DeviceType::Other(0x99), Quantity::Temperature).unwrap(),
            ObisCode::new(0, 0, 96, 9, 0)
        );
    }

    #[test]
    fn format_and_parse() {
        assert_eq!(format_obis(ObisCode::new(1, 0, 1, 8, 0)), "1-0:1.8.0");
        assert_eq!(
            parse_obis("255-255:255.255.255"),
            Ok(ObisCode::new(255, 255, 255, 255, 255))
        );
        for bad in [
            "1-0:1.8",
            "1-0:1.8.0.0",
            "1:0-1.8.0",
            "256-0:1.8.0",
            "1-0:1.8.",
            "-0:1.8.0",
            "1-0:+1.8.0",
            "1-0:1.8.0*255",
        ] {
            assert_eq!(
                parse_obis(bad),
                Err(ObisError::MalformedObis(bad.into())),
                "{bad}"
            );
        }
    }

    proptest! {
        #[test]
        fn obis_round_trip(a: u8, b: u8, c: u8, d: u8, e: u8) {
            let code = ObisCode::new(a, b, c, d, e);
            prop_assert_eq!(parse_obis(&format_obis(code)), Ok(code));
        }
    }

    #[test]
    fn translation_is_total_and_value_preserving() {
        let devices = [
            DeviceType::Electricity,
            DeviceType::Gas,
            DeviceType::Heat,
            DeviceType::HotWater,
            DeviceType::Repeater,
            DeviceType::Other(0x07),
        ];
        let mut translated = 0;
        for vif in 0..=255u8 {
            let Ok((quantity, unit, scale_exp)) = vif_decode(vif) else {
                continue;
            };
            assert_eq!(encode_vif(quantity, scale_exp), Ok(vif));
            for device in devices {
                let meter = MeterAddress::new("ABC", 1, 0, device).unwrap();
                let record = DataRecord {
                    coding: Coding::Int32,
                    quantity,
                    scale_exp,
                    value: -42,
                };
                let table_has_pair = map_to_obis(device, quantity).is_ok();
                match ObisReading::from_record(meter, &record, 1.0) {
                    Ok(reading) => {
                        assert!(table_has_pair);
                        assert_eq!(reading.value, -42);
                        assert_eq!(reading.scale_exp, scale_exp);
                        assert_eq!(reading.unit, unit);
                        translated += 1;
                    }
                    Err(ObisError::UnmappedPair { .. }) => assert!(!table_has_pair),
                    Err(e) => panic!("unexpected {e}"),
                }
            }
        }
        // 8 electricity energy + 8 power + 8 gas volume + 8 heat energy
        // + 8 hot-water volume + 6 temperature
        assert_eq!(translated, 46);
    }
}
