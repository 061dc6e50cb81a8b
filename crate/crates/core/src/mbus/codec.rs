use super::{
    crc16, Coding, Control, DataRecord, DeviceType, Manufacturer, MbusError, MeterAddress,
    Quantity, RawFrame, Telegram, CI_FIELD, MAX_RECORDS, MIN_FRAME_LEN,
};

/// VIF byte for a quantity at a decimal scale.
pub fn encode_vif(quantity: Quantity, scale_exp: i8) -> Result<u8, MbusError> {
    let (base, min_exp) = match quantity {
        Quantity::Energy => (0x00, -3),
        Quantity::Volume => (0x10, -6),
        Quantity::Power => (0x28, -3),
        Quantity::Temperature if scale_exp == -1 => return Ok(0x5A),
        Quantity::Temperature => {
            return Err(MbusError::UnencodableScale {
                quantity,
                scale_exp,
            })
        }
    };
    let n = i16::from(scale_exp) - min_exp;
    if (0..=7).contains(&n) {
        Ok(base + n as u8)
    } else {
        Err(MbusError::UnencodableScale {
            quantity,
            scale_exp,
        })
    }
}

pub fn decode_vif(vif: u8) -> Result<(Quantity, i8), MbusError> {
    let n = (vif & 0x07) as i8;
    match vif {
        0x00..=0x07 => Ok((Quantity::Energy, n - 3)),
        0x10..=0x17 => Ok((Quantity::Volume, n - 6)),
        0x28..=0x2F => Ok((Quantity::Power, n - 3)),
        0x5A => Ok((Quantity::Temperature, -1)),
        other => Err(MbusError::UnknownVif(other)),
    }
}

fn push_bcd(out: &mut Vec<u8>, mut value: u32) {
    for _ in 0..4 {
        let lo = (value % 10) as u8;
        value /= 10;
        let hi = (value % 10) as u8;
        value /= 10;
        out.push(hi << 4 | lo);
    }
}

fn read_bcd(bytes: &[u8]) -> Result<u32, MbusError> {
    bytes.iter().rev().try_fold(0u32, |acc, &b| {
        let (hi, lo) = (b >> 4, b & 0x0F);
        if hi > 9 || lo > 9 {
            return Err(MbusError::BadBcd(b));
        }
        Ok(acc * 100 + u32::from(hi) * 10 + u32::from(lo))
    })
}

pub fn encode_telegram(telegram: &Telegram) -> Result<RawFrame, MbusError> {
    telegram.validate()?;
    let address = &telegram.address;

    let mut out = Vec::with_capacity(MIN_FRAME_LEN + telegram.records.len() * 8);
    out.push(0); // L, patched below
    out.push(telegram.control.code());
    out.extend_from_slice(&address.manufacturer.pack().to_le_bytes());
    push_bcd(&mut out, address.ident);
    out.push(address.version);
    out.push(address.device_type.code());
    out.push(CI_FIELD);
    out.push(telegram.access_number);

    for record in &telegram.records {
        out.push(record.coding.dif());
        out.push(encode_vif(record.quantity, record.scale_exp)?);
        match record.coding {
            Coding::Bcd8 => push_bcd(&mut out, record.value as u32),
            coding => out.extend_from_slice(&record.value.to_le_bytes()[..coding.width()]),
        }
    }

    // At most 10 records of 8 bytes each, so L always fits a byte.
    out[0] = (out.len() - 1) as u8;
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(RawFrame(out))
}

/// Decode a frame. Total over arbitrary input: malformed bytes produce an
/// error, never a panic.
pub fn decode_telegram(frame: &RawFrame) -> Result<Telegram, MbusError> {
    let bytes = frame.as_bytes();
    if bytes.len() < MIN_FRAME_LEN || usize::from(bytes[0]) != bytes.len() - 3 {
        return Err(MbusError::BadLength);
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 2);
    let found = u16::from_be_bytes([crc_bytes[0], crc_bytes[1]]);
    let computed = crc16(body);
    if found != computed {
        return Err(MbusError::BadCrc { found, computed });
    }

    let control = Control::from_code(body[1])?;
    let manufacturer = Manufacturer::unpack(u16::from_le_bytes([body[2], body[3]]))?;
    let ident = read_bcd(&body[4..8])?;
    let address = MeterAddress {
        manufacturer,
        ident,
        version: body[8],
        device_type: DeviceType::from_code(body[9]),
    };
    if body[10] != CI_FIELD {
        return Err(MbusError::BadCi(body[10]));
    }
    let access_number = body[11];

    let mut records = Vec::new();
    let mut rest = &body[12..];
    while !rest.is_empty() {
        if records.len() == MAX_RECORDS {
            return Err(MbusError::TooManyRecords(MAX_RECORDS + 1));
        }
        let coding = Coding::from_dif(rest[0])?;
        let &vif = rest.get(1).ok_or(MbusError::BadLength)?;
        let (quantity, scale_exp) = decode_vif(vif)?;
        let width = coding.width();
        let data = rest.get(2..2 + width).ok_or(MbusError::BadLength)?;
        let value = match coding {
            Coding::Bcd8 => i64::from(read_bcd(data)?),
            _ => {
                let mut buf = if data[width - 1] & 0x80 != 0 {
                    [0xFF; 8]
                } else {
                    [0; 8]
                };
                buf[..width].copy_from_slice(data);
                i64::from_le_bytes(buf)
            }
        };
        records.push(DataRecord {
            coding,
            quantity,
            scale_exp,
            value,
        });
        rest = &rest[2 + width..];
    }

    let telegram = Telegram {
        control,
        address,
        access_number,
        records,
    };
    telegram.validate()?;
    Ok(telegram)
}
