use std::collections::VecDeque;

use super::config::HierarchyConfig;
use super::level::{CacheLevel, Evicted};
use super::{AccessOutcome, HitLevel, MemCounters, MemoryModel, PrefetchOutcomes, PrefetchResponse};
use crate::addr::BlockAddress;
use crate::error::ConfigError;
use crate::trace::AccessKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InFlightPrefetch {
    pub block: BlockAddress,
    pub issue_cycle: u64,
    pub ready_cycle: u64,
    pub tag: u32,
}

/// Scalar-clock L1D/L2 (optional L3) hierarchy. Levels are non-inclusive;
/// prefetches fill L2 only.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    cfg: HierarchyConfig,
    l1: CacheLevel,
    l2: CacheLevel,
    l3: Option<CacheLevel>,
    clock: u64,
    in_flight: VecDeque<InFlightPrefetch>,
    outcomes: PrefetchOutcomes,
    counters: MemCounters,
    finished: bool,
}

impl Hierarchy {
    pub fn new(cfg: HierarchyConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            l1: CacheLevel::new(&cfg.l1),
            l2: CacheLevel::new(&cfg.l2),
            l3: cfg.l3.as_ref().map(CacheLevel::new),
            cfg,
            clock: 0,
            in_flight: VecDeque::new(),
            outcomes: PrefetchOutcomes::default(),
            counters: MemCounters::default(),
            finished: false,
        })
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.cfg
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &InFlightPrefetch> {
        self.in_flight.iter()
    }

    pub fn l2_contains(&self, block: BlockAddress) -> bool {
        self.l2.contains(block)
    }

    pub fn l1_contains(&self, block: BlockAddress) -> bool {
        self.l1.contains(block)
    }

    /// Lets simulated time pass without an access.
    pub fn advance(&mut self, cycles: u64) {
        self.clock += cycles;
        self.retire_ready();
    }

    fn note_l2_eviction(&mut self, ev: Option<Evicted>) {
        if let Some(Evicted { prefetched: true, tag }) = ev {
            self.outcomes.entry(tag).evicted_unused += 1;
        }
    }

    fn retire_ready(&mut self) {
        while let Some(pos) = self.in_flight.iter().position(|p| p.ready_cycle <= self.clock) {
            let p = self.in_flight.remove(pos).unwrap();
            let ev = self.l2.fill(p.block, Some(p.tag));
            self.note_l2_eviction(ev);
        }
    }
}

impl MemoryModel for Hierarchy {
    fn demand_access(&mut self, block: BlockAddress, _kind: AccessKind) -> AccessOutcome {
        self.retire_ready();
        self.counters.demand_accesses += 1;
        let l1_lat = self.l1.hit_latency;
        let mut out = AccessOutcome {
            level_hit: HitLevel::L1,
            latency_cycles: l1_lat,
            l2_miss_block: None,
            was_prefetched_hit: false,
            was_late_prefetch_hit: false,
            prefetch_tag: None,
        };
        if self.l1.access(block).is_some() {
            self.clock += out.latency_cycles;
            self.counters.total_latency += out.latency_cycles;
            return out;
        }
        self.counters.l1_misses += 1;
        let to_l2 = l1_lat + self.l2.hit_latency;
        if let Some(line) = self.l2.access(block) {
            out.level_hit = HitLevel::L2;
            out.latency_cycles = to_l2;
            if line.prefetched {
                out.was_prefetched_hit = true;
                out.prefetch_tag = Some(line.tag);
                self.outcomes.entry(line.tag).useful += 1;
                self.l2.mark_demanded(block);
            }
        } else if let Some(pos) = self.in_flight.iter().position(|p| p.block == block) {
            // demand catches an outstanding prefetch: the prefetch is credited
            // as late and the demand pays what is left of the memory trip
            let p = self.in_flight.remove(pos).unwrap();
            let arrive = self.clock + to_l2;
            out.level_hit = HitLevel::L2;
            out.latency_cycles = to_l2 + p.ready_cycle.saturating_sub(arrive);
            out.was_prefetched_hit = true;
            out.was_late_prefetch_hit = true;
            out.prefetch_tag = Some(p.tag);
            self.outcomes.entry(p.tag).useful_late += 1;
            let ev = self.l2.fill(block, None);
            self.note_l2_eviction(ev);
        } else {
            self.counters.l2_demand_misses += 1;
            out.l2_miss_block = Some(block);
            let mut lat = to_l2;
            let l3_hit = match self.l3.as_mut() {
                Some(l3) => {
                    lat += l3.hit_latency;
                    let hit = l3.access(block).is_some();
                    if !hit {
                        l3.fill(block, None);
                    }
                    hit
                }
                None => false,
            };
            if l3_hit {
                out.level_hit = HitLevel::L3;
            } else {
                out.level_hit = HitLevel::Memory;
                lat += self.cfg.memory_latency_cycles;
                self.counters.demand_dram += 1;
            }
            out.latency_cycles = lat;
            let ev = self.l2.fill(block, None);
            self.note_l2_eviction(ev);
        }
        self.l1.fill(block, None);
        self.clock += out.latency_cycles;
        self.counters.total_latency += out.latency_cycles;
        out
    }

    fn issue_prefetch(&mut self, block: BlockAddress, tag: u32) -> PrefetchResponse {
        self.retire_ready();
        if self.l2.contains(block) || self.in_flight.iter().any(|p| p.block == block) {
            self.counters.prefetch_redundant += 1;
            return PrefetchResponse::Redundant;
        }
        if self.in_flight.len() >= self.cfg.prefetch_queue {
            self.counters.prefetch_dropped += 1;
            return PrefetchResponse::Dropped;
        }
        self.in_flight.push_back(InFlightPrefetch {
            block,
            issue_cycle: self.clock,
            ready_cycle: self.clock + self.cfg.memory_latency_cycles,
            tag,
        });
        self.counters.prefetch_accepted += 1;
        self.counters.prefetch_dram += 1;
        PrefetchResponse::Accepted
    }

    fn classify_prefetch_outcomes(&mut self) -> PrefetchOutcomes {
        if !self.finished {
            self.finished = true;
            // still in flight at the end: never referenced
            for p in std::mem::take(&mut self.in_flight) {
                self.outcomes.entry(p.tag).never_used += 1;
            }
            let resident: Vec<u32> = self.l2.lines().filter(|l| l.prefetched).map(|l| l.tag).collect();
            for s in resident {
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
    use crate::cache::CacheConfig;

    fn blk(v: u64) -> BlockAddress {
        BlockAddress::new(v).unwrap()
    }

    fn h() -> Hierarchy {
        Hierarchy::new(HierarchyConfig::default()).unwrap()
    }

    #[test]
    fn cold_then_l1_hit() {
        let mut h = h();
        let o = h.demand_access(blk(0x41), AccessKind::Load);
        assert_eq!(o.level_hit, HitLevel::Memory);
        assert_eq!(o.latency_cycles, 4 + 12 + 200);
        assert_eq!(o.l2_miss_block, Some(blk(0x41)));
        let o = h.demand_access(blk(0x41), AccessKind::Load);
        assert_eq!(o.level_hit, HitLevel::L1);
        assert_eq!(o.latency_cycles, 4);
        assert_eq!(h.clock(), 220);
    }

    #[test]
    fn ninth_block_in_a_set_evicts_lru_from_l1_only() {
        let mut h = h();
        let sets = CacheConfig::l1d().sets();
        let blocks: Vec<_> = (0..9).map(|i| blk(i * sets)).collect();
        for &b in &blocks {
            h.demand_access(b, AccessKind::Load);
        }
        let o = h.demand_access(blocks[0], AccessKind::Load);
        assert_eq!(o.level_hit, HitLevel::L2);
    }

    #[test]
    fn timely_prefetch_is_useful() {
        let mut h = h();
        assert_eq!(h.issue_prefetch(blk(7), 1), PrefetchResponse::Accepted);
        assert_eq!(h.issue_prefetch(blk(7), 1), PrefetchResponse::Redundant);
        h.advance(201);
        let o = h.demand_access(blk(7), AccessKind::Load);
        assert_eq!(o.level_hit, HitLevel::L2);
        assert!(o.was_prefetched_hit && !o.was_late_prefetch_hit);
        let out = h.classify_prefetch_outcomes().total();
        assert_eq!((out.useful, out.useful_late, out.evicted_unused, out.never_used), (1, 0, 0, 0));
    }

    #[test]
    fn late_prefetch_charges_residual() {
        let mut h = h();
        h.issue_prefetch(blk(9), 0);
        h.advance(100);
        let o = h.demand_access(blk(9), AccessKind::Load);
        // ready at 200, demand reaches L2 at 100 + 16
        assert!(o.was_late_prefetch_hit);
        assert_eq!(o.latency_cycles, 16 + (200 - 116));
        assert_eq!(h.clock(), 200);
        assert_eq!(h.classify_prefetch_outcomes().total().useful_late, 1);
    }

    #[test]
    fn untouched_prefetch_is_never_used() {
        let mut h = h();
        h.issue_prefetch(blk(3), 0);
        h.advance(500);
        let t = h.classify_prefetch_outcomes().total();
        assert_eq!((t.useful, t.useful_late, t.evicted_unused, t.never_used), (0, 0, 0, 1));
    }

    #[test]
    fn conflicting_fills_evict_unused_prefetch() {
        let mut h = h();
        let sets = CacheConfig::l2().sets();
        h.issue_prefetch(blk(5), 0);
        h.advance(300);
        for i in 1..=1000 {
            h.demand_access(blk(5 + i * sets), AccessKind::Load);
        }
        let t = h.classify_prefetch_outcomes().total();
        assert_eq!((t.useful, t.useful_late, t.evicted_unused, t.never_used), (0, 0, 1, 0));
    }

    #[test]
    fn queue_cap_drops() {
        let mut h = h();
        for i in 0..16 {
            assert_eq!(h.issue_prefetch(blk(100 + i), 0), PrefetchResponse::Accepted);
        }
        assert_eq!(h.issue_prefetch(blk(500), 0), PrefetchResponse::Dropped);
        assert_eq!(h.counters().prefetch_dropped, 1);
        h.advance(200);
        assert_eq!(h.issue_prefetch(blk(500), 0), PrefetchResponse::Accepted);
    }

    #[test]
    fn prefetch_does_not_change_demand_blocks() {
        let mut a = h();
        let mut b = h();
        let seq: Vec<u64> = (0..2000).map(|i| (i * 7919) % 5003).collect();
        let mut la = 0;
        for (i, &x) in seq.iter().enumerate() {
            la += a.demand_access(blk(x), AccessKind::Load).latency_cycles;
            if i % 3 == 0 {
                b.issue_prefetch(blk(x + 1), 0);
            }
            b.demand_access(blk(x), AccessKind::Load);
        }
        assert_eq!(a.clock(), la);
        assert_eq!(a.counters().total_latency, la);
        assert!(b.counters().l2_demand_misses <= a.counters().l2_demand_misses);
    }
}
