//! Virtual-to-block address translation.
//!
//! `Identity` drops the bits above the 52-bit physical span and the block
//! offset. `PageShuffled` additionally permutes 4 KiB page frames with a
//! seeded Feistel network over the 40-bit frame number, so in-page offsets
//! survive and the mapping stays a bijection.

use serde::{Deserialize, Serialize};

use crate::addr::{BlockAddress, VirtualAddress, BLOCK_OFFSET_BITS, PHYS_ADDR_BITS};

const PAGE_BITS: u32 = 12;
const FRAME_BITS: u32 = PHYS_ADDR_BITS - PAGE_BITS;
const HALF_BITS: u32 = FRAME_BITS / 2;
const HALF_MASK: u64 = (1 << HALF_BITS) - 1;
const ROUNDS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Translation {
    #[default]
    Identity,
    PageShuffled { seed: u64 },
}

impl Translation {
    pub fn translate(&self, vaddr: VirtualAddress) -> BlockAddress {
        let phys = vaddr.value() & ((1u64 << PHYS_ADDR_BITS) - 1);
        let phys = match *self {
            Translation::Identity => phys,
            Translation::PageShuffled { seed } => {
                let frame = phys >> PAGE_BITS;
                let offset = phys & ((1 << PAGE_BITS) - 1);
                (permute_frame(frame, seed) << PAGE_BITS) | offset
            }
        };
        BlockAddress::masked(phys >> BLOCK_OFFSET_BITS)
    }
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn permute_frame(frame: u64, seed: u64) -> u64 {
    let mut left = frame >> HALF_BITS;
    let mut right = frame & HALF_MASK;
    for round in 0..ROUNDS {
        let f = mix(right ^ seed.rotate_left(17) ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15)) & HALF_MASK;
        let next = left ^ f;
        left = right;
        right = next;
    }
    (left << HALF_BITS) | right
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn identity_examples() {
        let t = Translation::Identity;
        assert_eq!(t.translate(VirtualAddress(0)).value(), 0);
        assert_eq!(t.translate(VirtualAddress(0x1040)).value(), 0x41);
        assert_eq!(t.translate(VirtualAddress(1 << 52 | 0x1040)).value(), 0x41);
    }

    #[test]
    fn shuffled_is_a_page_bijection_over_1mib() {
        let t = Translation::PageShuffled { seed: 7 };
        let mut frames = HashSet::new();
        let mut blocks = HashSet::new();
        for page in 0..256u64 {
            let base = page << 12;
            let frame = t.translate(VirtualAddress(base)).value() >> 6;
            assert!(frames.insert(frame), "frame collision for page {page}");
            for off in (0..4096).step_by(64) {
                let b = t.translate(VirtualAddress(base + off));
                assert_eq!(b.value() >> 6, frame);
                assert_eq!(b.value() & 63, off >> 6);
                assert!(blocks.insert(b));
            }
        }
        // shuffling actually moves pages
        assert!(frames.iter().enumerate().any(|(i, _)| t.translate(VirtualAddress((i as u64) << 12)).value() >> 6 != i as u64));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = Translation::PageShuffled { seed: 3 };
        let b = Translation::PageShuffled { seed: 4 };
        let v = VirtualAddress(0x7654_3210);
        assert_eq!(a.translate(v), a.translate(v));
        assert_ne!(a.translate(v), b.translate(v));
    }

    proptest::proptest! {
        #[test]
        fn frame_permutation_injective(x in 0u64..(1 << 40), y in 0u64..(1 << 40), seed in proptest::prelude::any::<u64>()) {
            proptest::prop_assume!(x != y);
            proptest::prop_assert_ne!(permute_frame(x, seed), permute_frame(y, seed));
            proptest::prop_assert!(permute_frame(x, seed) < (1 << 40));
        }
    }
}
