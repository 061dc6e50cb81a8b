use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MbusError;

/// Three-letter manufacturer code, packed into 15 bits on the wire
/// (EN 61107 / FLAG convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Manufacturer([u8; 3]);

impl Manufacturer {
    pub fn new(code: &str) -> Result<Self, MbusError> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(MbusError::InvalidManufacturer(code.to_owned()));
        }
        Ok(Self([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // Only ever constructed from ASCII uppercase letters.
        std::str::from_utf8(&self.0).expect("manufacturer is ASCII")
    }

    pub fn pack(&self) -> u16 {
        self.0
            .iter()
            .fold(0u16, |acc, &c| acc * 32 + u16::from(c - 64))
    }

    pub fn unpack(code: u16) -> Result<Self, MbusError> {
        let mut letters = [0u8; 3];
        for (i, slot) in letters.iter_mut().enumerate() {
            let group = (code >> (10 - 5 * i)) & 0x1F;
            if !(1..=26).contains(&group) {
                return Err(MbusError::InvalidManufacturerCode(code));
            }
            *slot = group as u8 + 64;
        }
        // The 16th bit is unused by the packing; reject it so pack/unpack stay bijective.
        if code & 0x8000 != 0 {
            return Err(MbusError::InvalidManufacturerCode(code));
        }
        Ok(Self(letters))
    }
}

/// Pack a three-letter manufacturer code: `(c1-64)*1024 + (c2-64)*32 + (c3-64)`.
pub fn pack_manufacturer(code: &str) -> Result<u16, MbusError> {
    Manufacturer::new(code).map(|m| m.pack())
}

pub fn unpack_manufacturer(code: u16) -> Result<String, MbusError> {
    Manufacturer::unpack(code).map(|m| m.as_str().to_owned())
}

impl fmt::Display for Manufacturer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Manufacturer {
    type Err = MbusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for Manufacturer {
    type Error = MbusError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(&s)
    }
}

impl From<Manufacturer> for String {
    fn from(m: Manufacturer) -> Self {
        m.as_str().to_owned()
    }
}
