//! A memory model whose hit/miss outcomes are given up front.
//!
//! Used for small hand-written examples where every access is annotated as
//! a hit or a miss. A flagged access is a miss unless a prefetch for its
//! block is pending, in which case the prefetch is consumed and counted as
//! useful. Unflagged accesses always hit in L1.

use std::collections::BTreeMap;

use super::{AccessOutcome, HitLevel, MemCounters, MemoryModel, PrefetchOutcomes, PrefetchResponse};
use crate::addr::BlockAddress;
use crate::trace::AccessKind;

#[derive(Debug, Clone)]
pub struct ScriptedMemory {
    flags: Vec<bool>,
    cursor: usize,
    pending: BTreeMap<BlockAddress, u32>,
    outcomes: PrefetchOutcomes,
    counters: MemCounters,
    clock: u64,
    finished: bool,
}

const HIT_LATENCY: u64 = 4;
const MISS_LATENCY: u64 = 216;

impl ScriptedMemory {
    /// `miss_flags[i]` is the outcome of the i-th demand access.
    pub fn new(miss_flags: Vec<bool>) -> Self {
        Self {
            flags: miss_flags,
            cursor: 0,
            pending: BTreeMap::new(),
            outcomes: PrefetchOutcomes::default(),
            counters: MemCounters::default(),
            clock: 0,
            finished: false,
        }
    }

    pub fn pending(&self) -> impl Iterator<Item = BlockAddress> + '_ {
        self.pending.keys().copied()
    }
}

impl MemoryModel for ScriptedMemory {
    fn demand_access(&mut self, block: BlockAddress, _kind: AccessKind) -> AccessOutcome {
        let flagged = self.flags.get(self.cursor).copied().unwrap_or(false);
        self.cursor += 1;
        self.counters.demand_accesses += 1;
        let mut out = AccessOutcome {
            level_hit: HitLevel::L1,
            latency_cycles: HIT_LATENCY,
            l2_miss_block: None,
            was_prefetched_hit: false,
            was_late_prefetch_hit: false,
            prefetch_tag: None,
        };
        if flagged {
            self.counters.l1_misses += 1;
            if let Some(src) = self.pending.remove(&block) {
                out.level_hit = HitLevel::L2;
                out.latency_cycles = HIT_LATENCY + 12;
                out.was_prefetched_hit = true;
                out.prefetch_tag = Some(src);
                self.outcomes.entry(src).useful += 1;
            } else {
                out.level_hit = HitLevel::Memory;
                out.latency_cycles = MISS_LATENCY;
                out.l2_miss_block = Some(block);
                self.counters.l2_demand_misses += 1;
                self.counters.demand_dram += 1;
            }
        }
        self.clock += out.latency_cycles;
        self.counters.total_latency += out.latency_cycles;
        out
    }

    fn issue_prefetch(&mut self, block: BlockAddress, tag: u32) -> PrefetchResponse {
        if self.pending.contains_key(&block) {
            self.counters.prefetch_redundant += 1;
            return PrefetchResponse::Redundant;
        }
        self.pending.insert(block, tag);
        self.counters.prefetch_accepted += 1;
        self.counters.prefetch_dram += 1;
        PrefetchResponse::Accepted
    }

    fn classify_prefetch_outcomes(&mut self) -> PrefetchOutcomes {
        if !self.finished {
            self.finished = true;
            for (_, s) in std::mem::take(&mut self.pending) {
                self.outcomes.entry(s).never_used += 1;
            }
        }
        self.outcomes.clone()
    }

    fn counters(&self) -> MemCounters {
        self.counters
    }

    fn clock(&self) -> u64 {
        self.clock
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefetch_absorbs_one_flagged_miss() {
        let b = BlockAddress::new(10).unwrap();
        let mut m = ScriptedMemory::new(vec![true, true, false]);
        assert_eq!(m.issue_prefetch(b, 2), PrefetchResponse::Accepted);
        assert_eq!(m.issue_prefetch(b, 2), PrefetchResponse::Redundant);
        assert!(m.demand_access(b, AccessKind::Load).was_prefetched_hit);
        assert_eq!(m.demand_access(b, AccessKind::Load).level_hit, HitLevel::Memory);
        assert_eq!(m.demand_access(b, AccessKind::Load).level_hit, HitLevel::L1);
        let t = m.classify_prefetch_outcomes().total();
        assert_eq!((t.useful, t.never_used), (1, 0));
    }
}
