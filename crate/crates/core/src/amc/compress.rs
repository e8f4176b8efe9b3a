//! Base-delta encoding of correlated miss lists.
//!
//! The first miss is the base. Every miss, the first included, is stored as a
//! signed delta from the base using the narrowest of 1, 2 or 4 bytes that
//! fits all of them; when none fits, the raw 46-bit addresses are stored
//! instead. Bits are packed LSB-first and the payload is padded to a byte.

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::addr::{BlockAddress, BLOCK_ADDR_BITS};
use crate::error::CodecError;

/// Largest miss count the 5-bit count field can hold.
pub const MAX_COUNT: usize = 31;

/// Bits per uncompressed miss address.
pub const RAW_BITS: usize = BLOCK_ADDR_BITS as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionMode {
    Delta1 = 0,
    Delta2 = 1,
    Delta4 = 2,
    Raw = 3,
}

impl CompressionMode {
    pub const ALL: [CompressionMode; 4] = [Self::Delta1, Self::Delta2, Self::Delta4, Self::Raw];

    pub fn from_bits(bits: u8) -> Result<Self, CodecError> {
        match bits {
            0 => Ok(Self::Delta1),
            1 => Ok(Self::Delta2),
            2 => Ok(Self::Delta4),
            3 => Ok(Self::Raw),
            b => Err(CodecError::BadMode(b)),
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    /// Delta width in bytes, `None` for RAW.
    pub fn delta_bytes(self) -> Option<u32> {
        match self {
            Self::Delta1 => Some(1),
            Self::Delta2 => Some(2),
            Self::Delta4 => Some(4),
            Self::Raw => None,
        }
    }

    /// Encoded size in bits of `count` misses.
    pub fn encoded_bits(self, count: usize) -> usize {
        match self.delta_bytes() {
            Some(k) => RAW_BITS + count * 8 * k as usize,
            None => count * RAW_BITS,
        }
    }

    fn fits(self, delta: i64) -> bool {
        match self.delta_bytes() {
            Some(k) => delta.unsigned_abs() < 1u64 << (8 * k - 1),
            None => true,
        }
    }
}

/// A compressed miss list. Mode and count live beside the payload, as they
/// do in the index entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedEntry {
    pub mode: CompressionMode,
    pub count: u8,
    pub payload: Vec<u8>,
}

impl CompressedEntry {
    pub fn bit_len(&self) -> usize {
        self.mode.encoded_bits(self.count as usize)
    }

    pub fn byte_len(&self) -> usize {
        self.payload.len()
    }

    pub fn decompress(&self) -> Result<Vec<BlockAddress>, CodecError> {
        decompress(self.mode.bits(), self.count, &self.payload)
    }
}

/// Narrowest mode that represents every miss relative to the first.
pub fn select_mode(misses: &[BlockAddress]) -> CompressionMode {
    let Some(base) = misses.first() else {
        return CompressionMode::Delta1;
    };
    let widest = misses
        .iter()
        .map(|m| m.value() as i64 - base.value() as i64)
        .max_by_key(|d| d.unsigned_abs())
        .unwrap_or(0);
    CompressionMode::ALL.into_iter().find(|m| m.fits(widest)).unwrap()
}

pub fn compress(misses: &[BlockAddress]) -> Result<CompressedEntry, CodecError> {
    if misses.is_empty() || misses.len() > MAX_COUNT {
        return Err(CodecError::BadCount(misses.len().min(u8::MAX as usize) as u8));
    }
    let mode = select_mode(misses);
    let mut bits: BitVec<u8, Lsb0> = BitVec::with_capacity(mode.encoded_bits(misses.len()));
    let mut put = |value: u64, width: usize| {
        bits.extend_from_bitslice(&value.view_bits::<Lsb0>()[..width]);
    };
    match mode.delta_bytes() {
        Some(k) => {
            let base = misses[0].value();
            put(base, RAW_BITS);
            for m in misses {
                let d = m.value() as i64 - base as i64;
                put(d as u64, 8 * k as usize);
            }
        }
        None => {
            for m in misses {
                put(m.value(), RAW_BITS);
            }
        }
    }
    Ok(CompressedEntry { mode, count: misses.len() as u8, payload: bits.into_vec() })
}

pub fn decompress(mode: u8, count: u8, payload: &[u8]) -> Result<Vec<BlockAddress>, CodecError> {
    let mode = CompressionMode::from_bits(mode)?;
    if count == 0 || count as usize > MAX_COUNT {
        return Err(CodecError::BadCount(count));
    }
    let need = mode.encoded_bits(count as usize);
    let bits = payload.view_bits::<Lsb0>();
    if bits.len() < need {
        return Err(CodecError::ShortPayload { have: bits.len(), need });
    }
    let block = |v: i128| u64::try_from(v).ok().and_then(BlockAddress::new).ok_or(CodecError::OutOfRange(v));
    let mut out = Vec::with_capacity(count as usize);
    match mode.delta_bytes() {
        Some(k) => {
            let w = 8 * k as usize;
            let base = bits[..RAW_BITS].load_le::<u64>();
            for i in 0..count as usize {
                let at = RAW_BITS + i * w;
                let raw = bits[at..at + w].load_le::<u64>();
                // sign-extend from w bits
                let d = ((raw << (64 - w)) as i64) >> (64 - w);
                out.push(block(base as i128 + d as i128)?);
            }
        }
        None => {
            for i in 0..count as usize {
                let at = i * RAW_BITS;
                out.push(block(bits[at..at + RAW_BITS].load_le::<u64>() as i128)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blocks(vals: &[u64]) -> Vec<BlockAddress> {
        vals.iter().map(|&v| BlockAddress::new(v).unwrap()).collect()
    }

    #[test]
    fn twenty_sequential_misses_take_206_bits() {
        let xs = blocks(&(1000..1020).collect::<Vec<_>>());
        let c = compress(&xs).unwrap();
        assert_eq!(c.mode, CompressionMode::Delta1);
        assert_eq!(c.bit_len(), 206);
        assert_eq!(c.byte_len(), 26);
        assert_eq!(20 * RAW_BITS, 920);
    }

    #[test]
    fn wide_deltas_pick_wider_modes() {
        let b = 1u64 << 30;
        assert_eq!(compress(&blocks(&[b, b + 40_000])).unwrap().mode, CompressionMode::Delta4);
        let c = compress(&blocks(&[b, b + (1 << 40)])).unwrap();
        assert_eq!(c.mode, CompressionMode::Raw);
        assert_eq!(c.bit_len(), 2 * 46);
        assert_eq!(compress(&blocks(&[b, b - 127])).unwrap().mode, CompressionMode::Delta1);
        assert_eq!(compress(&blocks(&[b, b - 128])).unwrap().mode, CompressionMode::Delta2);
        assert_eq!(compress(&blocks(&[b, b + 32_767])).unwrap().mode, CompressionMode::Delta2);
        assert_eq!(compress(&blocks(&[b, b + 32_768])).unwrap().mode, CompressionMode::Delta4);
    }

    #[test]
    fn two_byte_payload_layout() {
        // base 0x1234, deltas 0, +300, -1
        let c = compress(&blocks(&[0x1234, 0x1234 + 300, 0x1233])).unwrap();
        assert_eq!(c.mode, CompressionMode::Delta2);
        let bits = c.payload.view_bits::<Lsb0>();
        assert_eq!(bits[..46].load_le::<u64>(), 0x1234);
        assert_eq!(bits[46..62].load_le::<u16>(), 0);
        assert_eq!(bits[62..78].load_le::<u16>(), 300);
        assert_eq!(bits[78..94].load_le::<u16>(), 0xffff);
        assert_eq!(c.decompress().unwrap(), blocks(&[0x1234, 0x1234 + 300, 0x1233]));
    }

    #[test]
    fn singleton_round_trip() {
        let xs = blocks(&[crate::addr::MAX_BLOCK]);
        assert_eq!(compress(&xs).unwrap().decompress().unwrap(), xs);
    }

    #[test]
    fn malformed_fields_rejected() {
        assert_eq!(decompress(4, 1, &[0; 8]), Err(CodecError::BadMode(4)));
        assert_eq!(decompress(0, 0, &[0; 8]), Err(CodecError::BadCount(0)));
        assert_eq!(decompress(0, 32, &[0; 64]), Err(CodecError::BadCount(32)));
        assert!(matches!(decompress(3, 2, &[0; 4]), Err(CodecError::ShortPayload { .. })));
        assert!(compress(&[]).is_err());
    }

    proptest! {
        #[test]
        fn chosen_mode_is_the_narrowest_fit(base in 0u64..(1 << 46), ds in prop::collection::vec(-(1i64 << 33)..(1i64 << 33), 0..19)) {
            let mut xs = vec![BlockAddress::new(base).unwrap()];
            xs.extend(ds.iter().filter_map(|&d| BlockAddress::new(base).unwrap().offset(d)));
            let c = compress(&xs).unwrap();
            for m in CompressionMode::ALL {
                let ok = xs.iter().all(|x| m.fits(x.value() as i64 - base as i64));
                if m < c.mode {
                    prop_assert!(!ok);
                }
                if m == c.mode {
                    prop_assert!(ok);
                }
            }
            prop_assert_eq!(c.bit_len(), c.mode.encoded_bits(xs.len()));
            prop_assert_eq!(c.byte_len(), c.bit_len().div_ceil(8));
        }
    }
}
