//! Simplified wireless M-Bus telegram format.
//!
//! One frame carries a link header, a fixed application CI field and up to
//! ten data records, protected by a single CRC over everything before it:
//!
//! ```text
//! [0]     L   bytes following L, excluding the CRC
//! [1]     C   0x44 SND-NR, 0x00 ACK, 0x53 command
//! [2..3]  M   packed manufacturer, little-endian
//! [4..7]  ID  8-digit BCD, little-endian
//! [8]     version
//! [9]     device type
//! [10]    CI  0x72
//! [11]    access number
//! [12..]  records: DIF, VIF, value bytes
//! [n-2..] CRC-16, big-endian
//! ```

mod codec;
mod crc;
mod manufacturer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{decode_telegram, decode_vif, encode_telegram, encode_vif};
pub use crc::crc16;
pub use manufacturer::{pack_manufacturer, unpack_manufacturer, Manufacturer};

pub const MAX_RECORDS: usize = 10;
pub const MAX_IDENT: u32 = 99_999_999;
/// Header (12 bytes) plus CRC.
pub const MIN_FRAME_LEN: usize = 14;
pub const CI_FIELD: u8 = 0x72;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MbusError {
    #[error("invalid manufacturer {0:?}: expected three letters A-Z")]
    InvalidManufacturer(String),
    #[error("invalid packed manufacturer code {0:#06x}")]
    InvalidManufacturerCode(u16),
    #[error("identification number {0} exceeds 8 digits")]
    InvalidIdent(u32),
    #[error("device type code {0:#04x} is reserved for a named device type")]
    ReservedDeviceType(u8),
    #[error("telegram has {0} records, at most 10 allowed")]
    TooManyRecords(usize),
    #[error("value {value} not representable as {coding:?}")]
    ValueOverflow { coding: Coding, value: i64 },
    #[error("no VIF encodes {quantity:?} at scale 10^{scale_exp}")]
    UnencodableScale { quantity: Quantity, scale_exp: i8 },
    #[error("invalid telegram: {0}")]
    InvalidTelegram(&'static str),
    #[error("bad frame length")]
    BadLength,
    #[error("CRC mismatch: frame carries {found:#06x}, computed {computed:#06x}")]
    BadCrc { found: u16, computed: u16 },
    #[error("unknown control field {0:#04x}")]
    UnknownControl(u8),
    #[error("unknown CI field {0:#04x}")]
    BadCi(u8),
    #[error("unknown DIF {0:#04x}")]
    UnknownCoding(u8),
    #[error("unknown VIF {0:#04x}")]
    UnknownVif(u8),
    #[error("invalid BCD byte {0:#04x}")]
    BadBcd(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceType {
    Electricity,
    Gas,
    Heat,
    HotWater,
    Repeater,
    /// Any code not claimed by the named variants.
    Other(u8),
}

impl DeviceType {
    pub fn code(self) -> u8 {
        match self {
            DeviceType::Electricity => 0x02,
            DeviceType::Gas => 0x03,
            DeviceType::Heat => 0x04,
            DeviceType::HotWater => 0x06,
            DeviceType::Repeater => 0x32,
            DeviceType::Other(code) => code,
        }
    }

    pub fn from_code(code: u8) -> Self {
        match code {
            0x02 => DeviceType::Electricity,
            0x03 => DeviceType::Gas,
            0x04 => DeviceType::Heat,
            0x06 => DeviceType::HotWater,
            0x32 => DeviceType::Repeater,
            other => DeviceType::Other(other),
        }
    }

    /// Lower-case medium name used on the tertiary channel.
    pub fn medium(self) -> &'static str {
        match self {
            DeviceType::Electricity => "electricity",
            DeviceType::Gas => "gas",
            DeviceType::Heat => "heat",
            DeviceType::HotWater => "hot_water",
            DeviceType::Repeater => "repeater",
            DeviceType::Other(_) => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterAddress {
    pub manufacturer: Manufacturer,
    pub ident: u32,
    pub version: u8,
    pub device_type: DeviceType,
}

impl MeterAddress {
    pub fn new(
        manufacturer: &str,
        ident: u32,
        version: u8,
        device_type: DeviceType,
    ) -> Result<Self, MbusError> {
        let address = Self {
            manufacturer: Manufacturer::new(manufacturer)?,
            ident,
            version,
            device_type,
        };
        address.validate()?;
        Ok(address)
    }

    pub fn validate(&self) -> Result<(), MbusError> {
        if self.ident > MAX_IDENT {
            return Err(MbusError::InvalidIdent(self.ident));
        }
        if let DeviceType::Other(code) = self.device_type {
            if !matches!(DeviceType::from_code(code), DeviceType::Other(_)) {
                return Err(MbusError::ReservedDeviceType(code));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MeterAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{:08}", self.manufacturer, self.ident)
    }
}

/// DIF data-field coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    Int8,
    Int16,
    Int32,
    Int48,
    Bcd8,
}

impl Coding {
    pub fn dif(self) -> u8 {
        match self {
            Coding::Int8 => 0x01,
            Coding::Int16 => 0x02,
            Coding::Int32 => 0x04,
            Coding::Int48 => 0x06,
            Coding::Bcd8 => 0x0C,
        }
    }

    pub fn from_dif(dif: u8) -> Result<Self, MbusError> {
        match dif {
            0x01 => Ok(Coding::Int8),
            0x02 => Ok(Coding::Int16),
            0x04 => Ok(Coding::Int32),
            0x06 => Ok(Coding::Int48),
            0x0C => Ok(Coding::Bcd8),
            other => Err(MbusError::UnknownCoding(other)),
        }
    }

    /// Number of value bytes following the VIF.
    pub fn width(self) -> usize {
        match self {
            Coding::Int8 => 1,
            Coding::Int16 => 2,
            Coding::Int32 | Coding::Bcd8 => 4,
            Coding::Int48 => 6,
        }
    }

    pub fn value_range(self) -> (i64, i64) {
        match self {
            Coding::Bcd8 => (0, 99_999_999),
            _ => {
                let bits = 8 * self.width() as u32;
                (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
            }
        }
    }

    pub fn fits(self, value: i64) -> bool {
        let (lo, hi) = self.value_range();
        (lo..=hi).contains(&value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Energy,
    Volume,
    Power,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRecord {
    pub coding: Coding,
    pub quantity: Quantity,
    /// Decimal exponent relative to the quantity's base unit.
    pub scale_exp: i8,
    pub value: i64,
}

impl DataRecord {
    pub fn validate(&self) -> Result<(), MbusError> {
        encode_vif(self.quantity, self.scale_exp)?;
        if !self.coding.fits(self.value) {
            return Err(MbusError::ValueOverflow {
                coding: self.coding,
                value: self.value,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    DataUnsolicited,
    Ack,
    Command,
}

impl Control {
    pub fn code(self) -> u8 {
        match self {
            Control::DataUnsolicited => 0x44,
            Control::Ack => 0x00,
            Control::Command => 0x53,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, MbusError> {
        match code {
            0x44 => Ok(Control::DataUnsolicited),
            0x00 => Ok(Control::Ack),
            0x53 => Ok(Control::Command),
            other => Err(MbusError::UnknownControl(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Telegram {
    pub control: Control,
    pub address: MeterAddress,
    pub access_number: u8,
    pub records: Vec<DataRecord>,
}

impl Telegram {
    pub fn ack(address: MeterAddress, access_number: u8) -> Self {
        Self {
            control: Control::Ack,
            address,
            access_number,
            records: Vec::new(),
        }
    }

    pub fn data(address: MeterAddress, access_number: u8, records: Vec<DataRecord>) -> Self {
        Self {
            control: Control::DataUnsolicited,
            address,
            access_number,
            records,
        }
    }

    pub fn validate(&self) -> Result<(), MbusError> {
        self.address.validate()?;
        if self.records.len() > MAX_RECORDS {
            return Err(MbusError::TooManyRecords(self.records.len()));
        }
        match self.control {
            Control::Ack if !self.records.is_empty() => {
                return Err(MbusError::InvalidTelegram("ACK carries records"))
            }
            Control::DataUnsolicited if self.records.is_empty() => {
                return Err(MbusError::InvalidTelegram("data telegram without records"))
            }
            _ => {}
        }
        self.records.iter().try_for_each(DataRecord::validate)
    }
}

/// Encoded frame bytes, L-field through CRC.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawFrame(pub Vec<u8>);

impl RawFrame {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode_upper(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        hex::decode(s.trim()).map(RawFrame)
    }
}

impl From<Vec<u8>> for RawFrame {
    fn from(bytes: Vec<u8>) -> Self {
        RawFrame(bytes)
    }
}
