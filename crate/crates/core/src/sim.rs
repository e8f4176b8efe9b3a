//! The simulation loop: replays a trace through a memory model and a set of
//! prefetchers.
//!
//! Each accepted prefetch carries a tag `(iteration << 8) | prefetcher`, so
//! outcomes can be attributed to the prefetcher that issued them and to the
//! iteration in which they were issued.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::addr::{BlockAddress, RegionDescriptor};
use crate::cache::{MemCounters, MemoryModel, OutcomeCounts, PrefetchResponse};
use crate::error::{ConfigError, SimError};
use crate::prefetch::{AccessCtx, Prefetcher, PrefetcherReport};
use crate::trace::{self, Directive, TraceEvent};
use crate::translate::Translation;

const SOURCE_BITS: u32 = 8;

/// Most prefetchers one run can drive.
pub const MAX_PREFETCHERS: usize = 1 << SOURCE_BITS;

pub fn encode_tag(iteration: usize, source: usize) -> u32 {
    ((iteration as u32) << SOURCE_BITS) | source as u32
}

pub fn decode_tag(tag: u32) -> (usize, usize) {
    ((tag >> SOURCE_BITS) as usize, (tag & (MAX_PREFETCHERS as u32 - 1)) as usize)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub translation: Translation,
    /// Keep per-iteration candidate and miss sets.
    pub record_sets: bool,
    /// Keep every demand L2 miss block in order.
    pub record_miss_log: bool,
}

/// Counters for one iteration. Outcomes are by issue iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationStats {
    pub accesses: u64,
    pub target_accesses: u64,
    pub l1_misses: u64,
    pub demand_misses: u64,
    pub non_target_demand_misses: u64,
    pub demand_dram: u64,
    pub prefetches_issued: u64,
    pub outcomes: OutcomeCounts,
}

impl IterationStats {
    fn add(&mut self, o: &IterationStats) {
        self.accesses += o.accesses;
        self.target_accesses += o.target_accesses;
        self.l1_misses += o.l1_misses;
        self.demand_misses += o.demand_misses;
        self.non_target_demand_misses += o.non_target_demand_misses;
        self.demand_dram += o.demand_dram;
        self.prefetches_issued += o.prefetches_issued;
        self.outcomes.add(&o.outcomes);
    }
}

/// Per-prefetcher totals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub name: String,
    pub candidates: u64,
    pub issued: u64,
    pub outcomes: OutcomeCounts,
    pub report: PrefetcherReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimResult {
    pub counters: MemCounters,
    pub iterations: Vec<IterationStats>,
    pub sources: Vec<SourceStats>,
    /// Distinct prefetch candidates per iteration, over all prefetchers.
    pub candidate_sets: Vec<BTreeSet<BlockAddress>>,
    /// Non-target blocks per iteration that missed L2 or hit a prefetched
    /// line, counted from the first target access of the iteration.
    pub miss_sets: Vec<BTreeSet<BlockAddress>>,
    pub miss_log: Vec<BlockAddress>,
}

impl SimResult {
    /// Sum of the iterations from `from` on.
    pub fn totals_from(&self, from: usize) -> IterationStats {
        let mut t = IterationStats::default();
        for it in self.iterations.iter().skip(from) {
            t.add(it);
        }
        t
    }

    pub fn metadata_bytes(&self) -> (u64, u64) {
        self.sources
            .iter()
            .fold((0, 0), |(r, w), s| (r + s.report.metadata.bytes_read, w + s.report.metadata.bytes_written))
    }

    /// Metadata transfers in 64 B lines.
    pub fn metadata_lines(&self) -> u64 {
        self.sources.iter().map(|s| s.report.metadata.lines_read + s.report.metadata.lines_written).sum()
    }

    pub fn peak_metadata_bytes(&self) -> u64 {
        self.sources.iter().map(|s| s.report.peak_metadata_bytes).sum()
    }
}

struct Run<'a, M: MemoryModel> {
    mem: &'a mut M,
    pfs: &'a mut [Box<dyn Prefetcher>],
    opts: SimOptions,
    target: Option<RegionDescriptor>,
    iteration: usize,
    seen_target: bool,
    res: SimResult,
}

impl<M: MemoryModel> Run<'_, M> {
    fn cur(&mut self) -> &mut IterationStats {
        let i = self.iteration;
        if self.res.iterations.len() <= i {
            self.res.iterations.resize(i + 1, IterationStats::default());
        }
        &mut self.res.iterations[i]
    }

    fn set_at(sets: &mut Vec<BTreeSet<BlockAddress>>, i: usize) -> &mut BTreeSet<BlockAddress> {
        if sets.len() <= i {
            sets.resize(i + 1, BTreeSet::new());
        }
        &mut sets[i]
    }

    fn issue(&mut self, source: usize, mut cands: Vec<BlockAddress>, issued_now: &mut Vec<BlockAddress>) {
        cands.truncate(self.pfs[source].degree());
        self.res.sources[source].candidates += cands.len() as u64;
        for b in cands {
            if issued_now.contains(&b) {
                continue;
            }
            issued_now.push(b);
            if self.opts.record_sets {
                Self::set_at(&mut self.res.candidate_sets, self.iteration).insert(b);
            }
            if self.mem.issue_prefetch(b, encode_tag(self.iteration, source)) == PrefetchResponse::Accepted {
                self.res.sources[source].issued += 1;
                self.cur().prefetches_issued += 1;
            }
        }
    }

    fn directive(&mut self, d: &Directive) -> Result<(), SimError> {
        match d {
            Directive::AddrTBase(r) => self.target = Some(*r),
            Directive::Update => {
                self.cur();
                self.iteration += 1;
                self.seen_target = false;
            }
            _ => {}
        }
        for p in self.pfs.iter_mut() {
            p.on_directive(d)?;
        }
        Ok(())
    }

    fn access(&mut self, ev: &TraceEvent) -> Result<(), SimError> {
        let TraceEvent::Access { vaddr, kind, pc } = *ev else { unreachable!() };
        let block = self.opts.translation.translate(vaddr);
        let ctx = AccessCtx { vaddr, block, pc, kind };
        let is_target = self.target.is_some_and(|t| t.contains(vaddr));
        if is_target {
            self.seen_target = true;
        }
        let mut issued_now = Vec::new();
        for i in 0..self.pfs.len() {
            let c = self.pfs[i].on_l1_access(&ctx)?;
            self.issue(i, c, &mut issued_now);
        }
        let out = self.mem.demand_access(block, kind);
        let st = self.cur();
        st.accesses += 1;
        st.target_accesses += is_target as u64;
        if !out.l1_miss() {
            return Ok(());
        }
        st.l1_misses += 1;
        if out.l2_miss_block.is_some() {
            st.demand_misses += 1;
            st.non_target_demand_misses += !is_target as u64;
            if out.level_hit == crate::cache::HitLevel::Memory {
                st.demand_dram += 1;
            }
            if self.opts.record_miss_log {
                self.res.miss_log.push(block);
            }
        }
        if self.opts.record_sets && !is_target && self.seen_target && (out.l2_miss_block.is_some() || out.was_prefetched_hit) {
            Self::set_at(&mut self.res.miss_sets, self.iteration).insert(block);
        }
        for i in 0..self.pfs.len() {
            let c = self.pfs[i].on_l2_access(&ctx, &out)?;
            self.issue(i, c, &mut issued_now);
        }
        Ok(())
    }
}

/// Replays `events` (which must be well formed) and classifies every
/// accepted prefetch at the end.
pub fn simulate<M: MemoryModel>(
    events: &[TraceEvent],
    mem: &mut M,
    prefetchers: &mut [Box<dyn Prefetcher>],
    opts: SimOptions,
) -> Result<SimResult, SimError> {
    trace::validate(events)?;
    if prefetchers.len() > MAX_PREFETCHERS {
        return Err(ConfigError::invalid("prefetcher.name", format!("at most {MAX_PREFETCHERS} prefetchers")).into());
    }
    let sources = prefetchers.iter().map(|p| SourceStats { name: p.name().to_string(), ..Default::default() }).collect();
    let mut run = Run {
        mem,
        pfs: prefetchers,
        opts,
        target: None,
        iteration: 0,
        seen_target: false,
        res: SimResult { sources, ..Default::default() },
    };
    for ev in events {
        match ev {
            TraceEvent::Directive(d) => run.directive(d)?,
            TraceEvent::Access { .. } => run.access(ev)?,
        }
    }
    // drop a trailing iteration that saw nothing
    while run.res.iterations.last().is_some_and(|it| it.accesses == 0 && it.prefetches_issued == 0) {
        run.res.iterations.pop();
    }
    let outcomes = run.mem.classify_prefetch_outcomes();
    for (&tag, o) in &outcomes.by_tag {
        let (it, src) = decode_tag(tag);
        run.res.sources[src].outcomes.add(o);
        if run.res.iterations.len() <= it {
            run.res.iterations.resize(it + 1, IterationStats::default());
        }
        run.res.iterations[it].outcomes.add(o);
    }
    for (s, p) in run.res.sources.iter_mut().zip(run.pfs.iter_mut()) {
        s.report = p.report();
    }
    run.res.counters = run.mem.counters();
    Ok(run.res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amc::{Amc, AmcConfig};
    use crate::baselines::NextLine;
    use crate::cache::{Hierarchy, HierarchyConfig, ScriptedMemory};
    use crate::prefetch::AmcPrefetcher;
    use crate::workload::worked_example_fixture;

    #[test]
    fn tags_round_trip() {
        assert_eq!(decode_tag(encode_tag(12345, 3)), (12345, 3));
    }

    #[test]
    fn empty_trace_is_all_zero() {
        let t = [TraceEvent::Directive(Directive::Init), TraceEvent::Directive(Directive::End)];
        let mut m = Hierarchy::new(HierarchyConfig::default()).unwrap();
        let r = simulate(&t, &mut m, &mut [], SimOptions::default()).unwrap();
        assert_eq!(r.counters, MemCounters::default());
        assert!(r.iterations.is_empty());
    }

    #[test]
    fn worked_example_amc_counts() {
        let w = worked_example_fixture();
        let (t, flags) = w.amc_trace();
        let mut m = ScriptedMemory::new(flags);
        let mut pfs: Vec<Box<dyn Prefetcher>> =
            vec![Box::new(AmcPrefetcher::new(Amc::new(AmcConfig::default()).unwrap()))];
        let r = simulate(&t, &mut m, &mut pfs, SimOptions { record_sets: true, ..Default::default() }).unwrap();
        assert_eq!(r.iterations.len(), 2);
        let it2 = &r.iterations[1];
        assert_eq!(it2.prefetches_issued, 10);
        assert_eq!(it2.outcomes.useful, 7);
        assert_eq!(it2.demand_misses, 7);
        assert_eq!(r.iterations[0].prefetches_issued, 0);
    }

    #[test]
    fn next_line_streams_sequential_blocks() {
        let mut t = vec![TraceEvent::Directive(Directive::Init)];
        for i in 0..4096u64 {
            t.push(TraceEvent::load(0x100_0000 + i * 64));
        }
        t.push(TraceEvent::Directive(Directive::End));
        let mut m = Hierarchy::new(HierarchyConfig::default()).unwrap();
        let mut pfs: Vec<Box<dyn Prefetcher>> = vec![Box::new(NextLine)];
        let r = simulate(&t, &mut m, &mut pfs, SimOptions::default()).unwrap();
        let o = r.sources[0].outcomes;
        assert_eq!(o.total(), r.sources[0].issued);
        assert!(o.useful + o.useful_late > 4000);
    }
}
