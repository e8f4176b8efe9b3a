//! Addresses, data-structure regions and region classification.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::ConfigError;

/// Cache block size in bytes. Fixed across the hierarchy.
pub const BLOCK_BYTES: u64 = 64;
/// log2 of [`BLOCK_BYTES`].
pub const BLOCK_OFFSET_BITS: u32 = 6;
/// Width of the simulated physical address space.
pub const PHYS_ADDR_BITS: u32 = 52;
/// Width of a block address (physical address without the block offset).
pub const BLOCK_ADDR_BITS: u32 = PHYS_ADDR_BITS - BLOCK_OFFSET_BITS;
/// Largest representable block address.
pub const MAX_BLOCK: u64 = (1 << BLOCK_ADDR_BITS) - 1;

/// A 64-bit virtual byte address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct VirtualAddress(pub u64);

impl VirtualAddress {
    pub const fn new(value: u64) -> Self {
        Self(value)
    }

    pub const fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for VirtualAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// A 46-bit cache block address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct BlockAddress(u64);

impl BlockAddress {
    /// Returns `None` when `value` does not fit in 46 bits.
    pub const fn new(value: u64) -> Option<Self> {
        if value <= MAX_BLOCK {
            Some(Self(value))
        } else {
            None
        }
    }

    /// Truncates `value` to 46 bits.
    pub const fn masked(value: u64) -> Self {
        Self(value & MAX_BLOCK)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// The following block, or `None` at the top of the address space.
    pub fn next(self) -> Option<Self> {
        Self::new(self.0 + 1)
    }

    pub fn offset(self, delta: i64) -> Option<Self> {
        let v = self.0 as i128 + delta as i128;
        if (0..=MAX_BLOCK as i128).contains(&v) {
            Some(Self(v as u64))
        } else {
            None
        }
    }
}

impl fmt::Display for BlockAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "blk:{:#x}", self.0)
    }
}

/// Element sizes accepted for a registered region. Line-sized elements are
/// allowed so that "one element per cache line" layouts can be expressed.
pub const ELEMENT_SIZES: [u8; 7] = [1, 2, 4, 8, 16, 32, 64];

/// A contiguous array registered with the prefetcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub base: VirtualAddress,
    pub element_count: u64,
    pub element_size: u8,
}

impl RegionDescriptor {
    pub fn new(base: u64, element_count: u64, element_size: u8) -> Result<Self, ConfigError> {
        let r = Self { base: VirtualAddress(base), element_count, element_size };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !ELEMENT_SIZES.contains(&self.element_size) {
            return Err(ConfigError::invalid(
                "element_size",
                format!("{} is not one of {:?}", self.element_size, ELEMENT_SIZES),
            ));
        }
        if self.element_count == 0 {
            return Err(ConfigError::invalid("element_count", "must be > 0"));
        }
        if self.element_count.checked_mul(self.element_size as u64).and_then(|len| self.base.0.checked_add(len)).is_none() {
            return Err(ConfigError::invalid("element_count", "region overflows the address space"));
        }
        Ok(())
    }

    pub fn byte_len(&self) -> u64 {
        self.element_count * self.element_size as u64
    }

    pub fn end(&self) -> u64 {
        self.base.0 + self.byte_len()
    }

    pub fn contains(&self, vaddr: VirtualAddress) -> bool {
        vaddr.0 >= self.base.0 && vaddr.0 < self.end()
    }

    /// Address of element `index`.
    pub fn element(&self, index: u64) -> VirtualAddress {
        VirtualAddress(self.base.0 + index * self.element_size as u64)
    }

    /// Element-aligned byte offset of `vaddr` from the region base.
    pub fn delta_of(&self, vaddr: VirtualAddress) -> u64 {
        let off = vaddr.0 - self.base.0;
        off - off % self.element_size as u64
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.base.0 < other.end() && other.base.0 < self.end()
    }
}

/// Which registered structure an address falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Target,
    Frontier,
    Other,
}

/// The target/frontier range-register pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMap {
    pub target: RegionDescriptor,
    pub frontier: RegionDescriptor,
}

impl RegionMap {
    pub fn new(target: RegionDescriptor, frontier: RegionDescriptor) -> Result<Self, ConfigError> {
        target.validate()?;
        frontier.validate()?;
        if target.overlaps(&frontier) {
            return Err(ConfigError::invalid("frontier", "target and frontier ranges overlap"));
        }
        Ok(Self { target, frontier })
    }

    pub fn classify(&self, vaddr: VirtualAddress) -> Region {
        classify(Some(&self.target), Some(&self.frontier), vaddr)
    }
}

/// Classification against optionally-registered ranges.
pub fn classify(
    target: Option<&RegionDescriptor>,
    frontier: Option<&RegionDescriptor>,
    vaddr: VirtualAddress,
) -> Region {
    if target.is_some_and(|t| t.contains(vaddr)) {
        Region::Target
    } else if frontier.is_some_and(|f| f.contains(vaddr)) {
        Region::Frontier
    } else {
        Region::Other
    }
}
