use serde::{Deserialize, Serialize};

use crate::addr::{classify, Region, RegionDescriptor, RegionMap, VirtualAddress};
use crate::error::ConfigError;

pub const PAGE_BYTES: u64 = 4096;

/// Default base of the first array.
pub const LAYOUT_BASE: u64 = 0x1000_0000;

/// PCs attached to generated accesses, one per static load/store.
pub mod pc {
    pub const FRONTIER: u64 = 0x40_0000;
    pub const TARGET: u64 = 0x40_0100;
    pub const NEIGHBOR: u64 = 0x40_0200;
    pub const PROPERTY_LOAD: u64 = 0x40_0300;
    pub const PROPERTY_STORE: u64 = 0x40_0304;
}

/// Where the four arrays live. V is the target and F the frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub v: RegionDescriptor,
    pub n: RegionDescriptor,
    pub p: RegionDescriptor,
    pub f: RegionDescriptor,
}

fn page_align(x: u64) -> u64 {
    x.div_ceil(PAGE_BYTES) * PAGE_BYTES
}

impl LayoutPlan {
    /// Page-aligned consecutive arrays V, N, P, F with the given element sizes.
    pub fn consecutive(
        base: u64,
        vertices: u64,
        edges: u64,
        sizes: [u8; 4],
    ) -> Result<Self, ConfigError> {
        let mut at = base;
        let mut next = |count: u64, size: u8| -> Result<RegionDescriptor, ConfigError> {
            let r = RegionDescriptor::new(at, count.max(1), size)?;
            at = page_align(r.end());
            Ok(r)
        };
        let plan = Self {
            v: next(vertices, sizes[0])?,
            n: next(edges, sizes[1])?,
            p: next(vertices, sizes[2])?,
            f: next(vertices, sizes[3])?,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// 8-byte deltas, 4-byte neighbor ids, 8-byte properties, 1-byte
    /// frontier flags.
    pub fn packed(vertices: u64, edges: u64) -> Result<Self, ConfigError> {
        Self::consecutive(LAYOUT_BASE, vertices, edges, [8, 4, 8, 1])
    }

    pub fn regions(&self) -> [RegionDescriptor; 4] {
        [self.v, self.n, self.p, self.f]
    }

    pub fn target(&self) -> RegionDescriptor {
        self.v
    }

    pub fn frontier(&self) -> RegionDescriptor {
        self.f
    }

    pub fn region_map(&self) -> RegionMap {
        RegionMap { target: self.v, frontier: self.f }
    }

    pub fn classify(&self, vaddr: VirtualAddress) -> Region {
        classify(Some(&self.v), Some(&self.f), vaddr)
    }

    /// Total bytes of the four arrays.
    pub fn input_bytes(&self) -> u64 {
        self.regions().iter().map(|r| r.byte_len()).sum()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let rs = self.regions();
        for (i, a) in rs.iter().enumerate() {
            a.validate()?;
            for b in &rs[i + 1..] {
                if a.base.0 < b.end() && b.base.0 < a.end() {
                    return Err(ConfigError::invalid("layout", "arrays overlap"));
                }
            }
        }
        let (t, f) = (self.v.element_size, self.f.element_size);
        if t % f != 0 && f % t != 0 {
            return Err(ConfigError::invalid("layout", "frontier and target element sizes must divide one another"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_is_page_aligned_and_disjoint() {
        let l = LayoutPlan::packed(1000, 9000).unwrap();
        for r in l.regions() {
            assert_eq!(r.base.0 % PAGE_BYTES, 0);
        }
        assert_eq!(l.input_bytes(), 8000 + 36000 + 8000 + 1000);
        assert_eq!(l.classify(l.v.element(3)), Region::Target);
        assert_eq!(l.classify(l.f.element(999)), Region::Frontier);
        assert_eq!(l.classify(l.n.element(0)), Region::Other);
    }

    #[test]
    fn overlap_rejected() {
        let mut l = LayoutPlan::packed(10, 10).unwrap();
        l.p = l.n;
        assert!(l.validate().is_err());
    }
}
