//! Two-level cache model with an L2 prefetch port.

mod config;
mod hierarchy;
mod level;
mod scripted;

pub use config::{CacheConfig, HierarchyConfig, ReplacementPolicy};
pub use hierarchy::{Hierarchy, InFlightPrefetch};
pub use scripted::ScriptedMemory;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::addr::BlockAddress;
use crate::trace::AccessKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitLevel {
    L1,
    L2,
    L3,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub level_hit: HitLevel,
    pub latency_cycles: u64,
    /// Set when the demand missed L2. Without an L3 this is exactly
    /// `level_hit == Memory`.
    pub l2_miss_block: Option<BlockAddress>,
    pub was_prefetched_hit: bool,
    pub was_late_prefetch_hit: bool,
    /// Tag of the prefetch credited for a prefetched hit.
    pub prefetch_tag: Option<u32>,
}

impl AccessOutcome {
    pub fn l1_miss(&self) -> bool {
        self.level_hit != HitLevel::L1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefetchResponse {
    Accepted,
    /// Already resident in L2 or already in flight.
    Redundant,
    /// The in-flight queue was full.
    Dropped,
}

/// How filled prefetches ended up. Every accepted prefetch lands in exactly
/// one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub useful: u64,
    pub useful_late: u64,
    pub evicted_unused: u64,
    pub never_used: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.useful + self.useful_late + self.evicted_unused + self.never_used
    }

    pub fn add(&mut self, o: &OutcomeCounts) {
        self.useful += o.useful;
        self.useful_late += o.useful_late;
        self.evicted_unused += o.evicted_unused;
        self.never_used += o.never_used;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefetchOutcomes {
    /// Keyed by the opaque tag given at issue.
    pub by_tag: BTreeMap<u32, OutcomeCounts>,
}

impl PrefetchOutcomes {
    pub fn total(&self) -> OutcomeCounts {
        let mut t = OutcomeCounts::default();
        for o in self.by_tag.values() {
            t.add(o);
        }
        t
    }

    pub(crate) fn entry(&mut self, tag: u32) -> &mut OutcomeCounts {
        self.by_tag.entry(tag).or_default()
    }
}

/// Raw event counters kept by a memory model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemCounters {
    pub demand_accesses: u64,
    pub l1_misses: u64,
    pub l2_demand_misses: u64,
    /// DRAM reads caused by demand misses.
    pub demand_dram: u64,
    /// DRAM reads caused by accepted prefetches.
    pub prefetch_dram: u64,
    pub prefetch_accepted: u64,
    pub prefetch_redundant: u64,
    pub prefetch_dropped: u64,
    pub total_latency: u64,
}

/// What the simulation engine needs from a memory system.
pub trait MemoryModel {
    fn demand_access(&mut self, block: BlockAddress, kind: AccessKind) -> AccessOutcome;
    fn issue_prefetch(&mut self, block: BlockAddress, tag: u32) -> PrefetchResponse;
    /// Final classification of every accepted prefetch. Called once, at end.
    fn classify_prefetch_outcomes(&mut self) -> PrefetchOutcomes;
    fn counters(&self) -> MemCounters;
    fn clock(&self) -> u64;
}
