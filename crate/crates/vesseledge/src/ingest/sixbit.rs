//! Six-bit ASCII armoring used by AIVDM payloads.
//!
//! AIS payload bits are grouped into 6-bit values and mapped onto a printable
//! subset of ASCII. `fill_bits` counts padding bits appended to reach a 6-bit
//! boundary; they are excluded from the decoded bit length.

use super::IngestError;

/// De-armored payload: one 6-bit group per payload character plus the number
/// of meaningful bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitField {
    groups: Vec<u8>,
    bit_len: usize,
}

/// Maps one armored character to its 6-bit value.
pub fn unarmor_char(c: char) -> Result<u8, IngestError> {
    let b = c as u32;
    match b {
        48..=87 => Ok((b - 48) as u8),
        96..=119 => Ok((b - 56) as u8),
        _ => Err(IngestError::Armor(c)),
    }
}

/// Maps a 6-bit value back to its armored character.
pub fn armor_value(v: u8) -> char {
    debug_assert!(v < 64);
    if v < 40 {
        (v + 48) as char
    } else {
        (v + 56) as char
    }
}

impl BitField {
    pub fn unarmor(payload: &str, fill_bits: u8) -> Result<Self, IngestError> {
        if payload.is_empty() {
            return Err(IngestError::Parse("empty payload".into()));
        }
        if fill_bits > 5 {
            return Err(IngestError::Parse(format!("fill bits {fill_bits} > 5")));
        }
        let mut groups = Vec::with_capacity(payload.len());
        for c in payload.chars() {
            groups.push(unarmor_char(c)?);
        }
        let total = groups.len() * 6;
        let bit_len = total
            .checked_sub(fill_bits as usize)
            .ok_or_else(|| IngestError::Parse("fill exceeds payload".into()))?;
        Ok(Self { groups, bit_len })
    }

    /// Re-armors the groups; inverse of [`BitField::unarmor`].
    pub fn armor(&self) -> String {
        self.groups.iter().map(|&v| armor_value(v)).collect()
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    fn bit(&self, i: usize) -> u8 {
        let group = self.groups[i / 6];
        (group >> (5 - (i % 6))) & 1
    }

    /// Unsigned big-endian field of `width` bits starting at `start`.
    pub fn get_u32(&self, start: usize, width: usize) -> Result<u32, IngestError> {
        debug_assert!(width <= 32);
        let end = start + width;
        if end > self.bit_len {
            return Err(IngestError::Truncated {
                need: end,
                have: self.bit_len,
            });
        }
        let mut v: u32 = 0;
        for i in start..end {
            v = (v << 1) | self.bit(i) as u32;
        }
        Ok(v)
    }

    /// Two's-complement signed field.
    pub fn get_i32(&self, start: usize, width: usize) -> Result<i32, IngestError> {
        let raw = self.get_u32(start, width)?;
        let shift = 32 - width;
        Ok(((raw << shift) as i32) >> shift)
    }
}

/// Builds an armored payload from raw bits (most significant first). Used by
/// the synthetic sentence generator; pads the final group with zero fill
/// bits and returns `(payload, fill_bits)`.
pub fn armor_bits(bits: &[bool]) -> (String, u8) {
    let fill = (6 - bits.len() % 6) % 6;
    let mut out = String::with_capacity(bits.len() / 6 + 1);
    let mut i = 0;
    while i < bits.len() {
        let mut v: u8 = 0;
        for j in 0..6 {
            let bit = if i + j < bits.len() {
                bits[i + j] as u8
            } else {
                0
            };
            v = (v << 1) | bit;
        }
        out.push(armor_value(v));
        i += 6;
    }
    (out, fill as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unarmor_known_values() {
        // '0' -> 0, 'W' -> 39, '`' -> 40, 'w' -> 63
        assert_eq!(unarmor_char('0').unwrap(), 0);
        assert_eq!(unarmor_char('W').unwrap(), 39);
        assert_eq!(unarmor_char('`').unwrap(), 40);
        assert_eq!(unarmor_char('w').unwrap(), 63);
        assert!(unarmor_char('X').is_err());
        assert!(unarmor_char(' ').is_err());
    }

    #[test]
    fn field_extraction() {
        // '1' = 000001, payload "11" = 000001_000001
        let f = BitField::unarmor("11", 0).unwrap();
        assert_eq!(f.bit_len(), 12);
        assert_eq!(f.get_u32(0, 6).unwrap(), 1);
        assert_eq!(f.get_u32(6, 6).unwrap(), 1);
        assert_eq!(f.get_u32(0, 12).unwrap(), 0b000001_000001);
        assert!(f.get_u32(8, 6).is_err());
    }

    #[test]
    fn signed_extraction() {
        // w = 111111: six ones = -1 in two's complement width 6
        let f = BitField::unarmor("w", 0).unwrap();
        assert_eq!(f.get_i32(0, 6).unwrap(), -1);
        let f = BitField::unarmor("P", 0).unwrap(); // 'P' = 32 = 100000
        assert_eq!(f.get_i32(0, 6).unwrap(), -32);
        assert_eq!(f.get_u32(0, 6).unwrap(), 32);
    }

    proptest! {
        // de-armoring then re-armoring reproduces the original characters
        #[test]
        fn armor_round_trip(payload in "[0-9:;<=>?@A-W`a-w]{1,82}", fill in 0u8..=5) {
            let f = BitField::unarmor(&payload, fill).unwrap();
            prop_assert_eq!(f.armor(), payload);
        }

        #[test]
        fn armor_bits_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..500)) {
            let (payload, fill) = armor_bits(&bits);
            let f = BitField::unarmor(&payload, fill).unwrap();
            prop_assert_eq!(f.bit_len(), bits.len());
            for (i, &b) in bits.iter().enumerate() {
                prop_assert_eq!(f.get_u32(i, 1).unwrap() == 1, b);
            }
        }
    }
}
