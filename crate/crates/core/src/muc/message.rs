//! Tertiary line protocol: one JSON object per line with a fixed key order.

use std::fmt::Write;

use crate::mbus::RawFrame;
use crate::obis::ObisReading;

#[derive(Debug, Clone, PartialEq)]
pub enum TertiaryMessage {
    /// Operation data channel: a translated reading.
    Reading(ObisReading),
    /// Service data channel: the accepted frame as received.
    Raw { frame: RawFrame, t_s: f64 },
}

/// Newline-terminated UTF-8 line for `message` sent by the MUC `muc`.
pub fn emit(muc: &str, message: &TertiaryMessage) -> Vec<u8> {
    let muc = serde_json::to_string(muc).expect("strings always serialise");
    let mut line = String::with_capacity(192);
    match message {
        TertiaryMessage::Reading(r) => {
            write!(
                line,
                r#"{{"kind":"reading","muc":{muc},"meter":{{"mfr":"{}","id":{},"medium":"{}"}},"obis":"{}","value":{},"scale":{},"unit":"{}","t":{:.3}}}"#,
                r.meter.manufacturer,
                r.meter.ident,
                r.meter.device_type.medium(),
                r.code,
                r.value,
                r.scale_exp,
                r.unit.symbol(),
                r.timestamp_s,
            )
        }
        TertiaryMessage::Raw { frame, t_s } => write!(
            line,
            r#"{{"kind":"raw","muc":{muc},"hex":"{}","t":{:.3}}}"#,
            frame.to_hex(),
            t_s
        ),
    }
    .expect("writing to a String cannot fail");
    line.push('\n');
    line.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbus::{encode_telegram, DeviceType, MeterAddress, Telegram};
    use crate::obis::{ObisCode, Unit};

    fn reading() -> ObisReading {
        ObisReading {
            code: ObisCode::new(1, 0, 1, 8, 0),
            value: 12_345,
            scale_exp: 0,
            unit: Unit::Wh,
            meter: MeterAddress::new("ABC", 12_345_678, 1, DeviceType::Electricity).unwrap(),
            timestamp_s: 3600.0,
        }
    }

    #[test]
    fn reading_line_is_exact() {
        let line = emit("MUC-1", &TertiaryMessage::Reading(reading()));
        assert_eq!(
            String::from_utf8(line).unwrap(),
            "{\"kind\":\"reading\",\"muc\":\"MUC-1\",\"meter\":{\"mfr\":\"ABC\",\"id\":12345678,\"medium\":\"electricity\"},\"obis\":\"1-0:1.8.0\",\"value\":12345,\"scale\":0,\"unit\":\"Wh\",\"t\":3600.000}\n"
        );
    }

    #[test]
    fn identical_readings_identical_bytes() {
        let m = TertiaryMessage::Reading(reading());
        assert_eq!(emit("MUC-1", &m), emit("MUC-1", &m));
    }

    #[test]
    fn raw_ack_line() {
        let address = MeterAddress::new("ABC", 12_345_678, 1, DeviceType::Electricity).unwrap();
        let frame = encode_telegram(&Telegram::ack(address, 0x2A)).unwrap();
        let line =
            String::from_utf8(emit("MUC-1", &TertiaryMessage::Raw { frame, t_s: 1.5 })).unwrap();
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(value["kind"], "raw");
        assert_eq!(value["hex"].as_str().unwrap().len(), 2 * 14);
        assert!(line.ends_with(",\"t\":1.500}\n"));
    }

    #[test]
    fn lines_are_valid_json_with_escaped_names() {
        let mut r = reading();
        r.value = -42;
        r.scale_exp = -3;
        r.unit = Unit::CubicMetre;
        r.timestamp_s = 0.0005;
        let line = emit("MUC \"north\"", &TertiaryMessage::Reading(r));
        let value: serde_json::Value = serde_json::from_slice(&line).unwrap();
        assert_eq!(value["muc"], "MUC \"north\"");
        assert_eq!(value["value"], -42);
        assert_eq!(value["scale"], -3);
        assert_eq!(value["unit"], "m3");
    }
}
