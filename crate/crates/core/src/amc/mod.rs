//! Access-to-miss correlation prefetcher.
//!
//! Iteration k records, for every window between two target-array
//! accesses, the non-target L2 misses seen in it. Iteration k+1 replays
//! them: frontier accesses stage the matching compressed entries into the
//! on-chip cache and the target access that opens a window issues them.

pub mod amc_cache;
pub mod compress;
pub mod identifier;
pub mod recorder;
pub mod store;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use amc_cache::{AmcCache, LookupRule, MatchClass};
pub use compress::{compress, decompress, CompressedEntry, CompressionMode};
pub use identifier::IndexIdentifier;
pub use recorder::{Binder, CorrelationEntry, TargetRecorder, Trigger};
pub use store::{IndexEntry, MetadataStore, MetadataTraffic, INDEX_ENTRY_BYTES};

use crate::addr::{classify, BlockAddress, Region, RegionDescriptor, VirtualAddress};
use crate::error::ConfigError;
use crate::trace::Directive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmcConfig {
    pub max_misses_per_entry: usize,
    pub cache_bytes: usize,
    pub cache_entries: usize,
    pub identifier_entries: usize,
    pub frontier_entries: usize,
    pub lookup: LookupRule,
    /// Invalidate cached entries once they have been replayed.
    pub consume_on_hit: bool,
    pub write_back: WriteBack,
}

/// How replayed correlations reach the next iteration's recording.
///
/// Prefetched blocks no longer miss, so without write-back a correlation
/// that was replayed successfully would vanish after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteBack {
    /// Replayed blocks that demand then hits in L2 are recorded as misses of
    /// the current window.
    #[default]
    Consumed,
    /// Every full-pair or latest-match hit entry is appended again, as is.
    Entries,
    Off,
}

impl Default for AmcConfig {
    fn default() -> Self {
        Self {
            max_misses_per_entry: 20,
            cache_bytes: 24 * 1024,
            cache_entries: 100,
            identifier_entries: 100,
            frontier_entries: 100,
            lookup: LookupRule::RecorderPair,
            consume_on_hit: false,
            write_back: WriteBack::Consumed,
        }
    }
}

impl AmcConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = |name: &str| format!("prefetcher.amc.{name}");
        if !(1..=compress::MAX_COUNT).contains(&self.max_misses_per_entry) {
            return Err(ConfigError::invalid(f("max_misses_per_entry"), "must be in 1..=31"));
        }
        for (name, v) in [
            ("cache_bytes", self.cache_bytes),
            ("cache_entries", self.cache_entries),
            ("identifier_entries", self.identifier_entries),
            ("frontier_entries", self.frontier_entries),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(f(name), "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Recent frontier deltas.
#[derive(Debug, Clone)]
pub struct FrontierBuffer {
    capacity: usize,
    deltas: VecDeque<u64>,
}

impl FrontierBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, deltas: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, delta: u64) {
        if self.deltas.len() == self.capacity {
            self.deltas.pop_front();
        }
        self.deltas.push_back(delta);
    }

    pub fn latest(&self) -> Option<u64> {
        self.deltas.back().copied()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn clear(&mut self) {
        self.deltas.clear();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseFlags {
    pub prefetch_enabled: bool,
    /// Opaque process id; no permission checks are made.
    pub asid: u64,
    pub miss_count_register: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmcStats {
    /// Entries produced by the binder.
    pub entries_recorded: u64,
    /// Replayed entries appended again to the recording buffer.
    pub entries_written_back: u64,
    /// Consumed replayed blocks recorded as misses.
    pub writeback_misses: u64,
    pub misses_recorded: u64,
    /// Misses seen before the first target access of an iteration.
    pub misses_dropped: u64,
    pub metadata: MetadataTraffic,
    pub peak_metadata_bytes: u64,
    /// Binder entries per compression mode (Δ1, Δ2, Δ4, RAW).
    pub mode_histogram: [u64; 4],
    /// Binder entries by miss count.
    pub miss_count_histogram: BTreeMap<u64, u64>,
    /// Windows by unsplit miss count.
    pub window_histogram: BTreeMap<u64, u64>,
    pub lookups: u64,
    pub lookup_hits: u64,
    pub entries_staged: u64,
    pub cache_evictions: u64,
    pub identifier_refills: u64,
    pub candidates: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone)]
pub struct Amc {
    cfg: AmcConfig,
    initialized: bool,
    target: Option<RegionDescriptor>,
    frontier: Option<RegionDescriptor>,
    recorder: TargetRecorder,
    binder: Binder,
    store: MetadataStore,
    identifier: IndexIdentifier,
    cache: AmcCache,
    frontier_buf: FrontierBuffer,
    flags: PhaseFlags,
    replayed: HashSet<BlockAddress>,
    stats: AmcStats,
}

impl Amc {
    pub fn new(cfg: AmcConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self {
            initialized: false,
            target: None,
            frontier: None,
            recorder: TargetRecorder::default(),
            binder: Binder::new(cfg.max_misses_per_entry),
            store: MetadataStore::default(),
            identifier: IndexIdentifier::new(cfg.identifier_entries),
            cache: AmcCache::new(cfg.cache_bytes, cfg.cache_entries),
            frontier_buf: FrontierBuffer::new(cfg.frontier_entries),
            flags: PhaseFlags::default(),
            replayed: HashSet::new(),
            stats: AmcStats::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &AmcConfig {
        &self.cfg
    }

    pub fn flags(&self) -> PhaseFlags {
        self.flags
    }

    pub fn recorder(&self) -> &TargetRecorder {
        &self.recorder
    }

    pub fn store(&self) -> &MetadataStore {
        &self.store
    }

    pub fn cache(&self) -> &AmcCache {
        &self.cache
    }

    pub fn identifier(&self) -> &IndexIdentifier {
        &self.identifier
    }

    pub fn classify(&self, vaddr: VirtualAddress) -> Region {
        classify(self.target.as_ref(), self.frontier.as_ref(), vaddr)
    }

    pub fn on_directive(&mut self, d: &Directive) -> Result<(), ConfigError> {
        match d {
            Directive::Init => {
                self.initialized = true;
                Ok(())
            }
            Directive::AddrTBase(r) => {
                r.validate()?;
                self.target = Some(*r);
                Ok(())
            }
            Directive::AddrFBase(r) => {
                r.validate()?;
                self.frontier = Some(*r);
                Ok(())
            }
            Directive::Update => self.on_update(),
            Directive::End => {
                self.on_end();
                Ok(())
            }
            Directive::Reset => {
                self.reset();
                Ok(())
            }
        }
    }

    fn require_init(&self) -> Result<(), ConfigError> {
        if self.initialized {
            Ok(())
        } else {
            Err(ConfigError::invalid("trace", "AMC used before Init"))
        }
    }

    fn commit(&mut self, e: CorrelationEntry) {
        let c = compress(&e.misses).expect("binder entries hold 1..=cap misses");
        self.store.append(e.trigger, e.window_count, &c);
        self.stats.entries_recorded += 1;
        self.stats.mode_histogram[c.mode.bits() as usize] += 1;
        *self.stats.miss_count_histogram.entry(e.misses.len() as u64).or_default() += 1;
    }

    /// An L1 demand access. Returns prefetch candidates.
    pub fn on_l1_access(&mut self, vaddr: VirtualAddress) -> Result<Vec<BlockAddress>, ConfigError> {
        self.require_init()?;
        match self.classify(vaddr) {
            Region::Target => {
                let t = self.target.expect("classified as target");
                if let Some(e) = self.binder.close_window() {
                    self.commit(e);
                }
                self.recorder.push(t.delta_of(vaddr));
                self.flags.miss_count_register = 0;
                if self.flags.prefetch_enabled {
                    return Ok(self.lookup());
                }
                Ok(Vec::new())
            }
            Region::Frontier => {
                let f = self.frontier.expect("classified as frontier");
                let fd = f.delta_of(vaddr);
                self.frontier_buf.push(fd);
                if let (true, Some(t)) = (self.flags.prefetch_enabled, self.target) {
                    let td = fd / f.element_size as u64 * t.element_size as u64;
                    self.stage(td);
                }
                Ok(Vec::new())
            }
            Region::Other => Ok(Vec::new()),
        }
    }

    fn stage(&mut self, target_delta: u64) {
        let found = self.identifier.probe(target_delta, &mut self.store);
        self.stats.identifier_refills = self.identifier.refills();
        for e in found {
            let payload = self.store.read_payload(&e);
            if self.cache.insert(e.trigger, e.mode, e.miss_count, &payload) {
                self.stats.entries_staged += 1;
            }
        }
        self.stats.cache_evictions = self.cache.evictions();
    }

    fn lookup(&mut self) -> Vec<BlockAddress> {
        let trig = self.recorder.trigger().expect("lookup follows a push");
        self.stats.lookups += 1;
        let hits = self.cache.lookup(trig.older, trig.latest, self.cfg.lookup);
        if hits.is_empty() {
            return Vec::new();
        }
        self.stats.lookup_hits += 1;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &(class, i) in &hits {
            let e = self.cache.entry(i).clone();
            let payload = self.cache.payload(i);
            let misses = decompress(e.mode.bits(), e.miss_count, &payload).expect("cached entries are well formed");
            out.extend(misses.into_iter().filter(|b| seen.insert(*b)));
            if self.cfg.write_back == WriteBack::Entries && class != MatchClass::Older {
                self.store.append_raw(trig, self.recorder.access_count(), e.mode, e.miss_count, &payload);
                self.stats.entries_written_back += 1;
            }
        }
        if self.cfg.consume_on_hit {
            for &(_, i) in &hits {
                self.cache.invalidate(i);
            }
        }
        if self.cfg.write_back == WriteBack::Consumed {
            self.replayed.extend(out.iter().copied());
        }
        self.stats.candidates += out.len() as u64;
        out
    }

    fn record_miss(&mut self, block: BlockAddress) {
        if let Some(e) = self.binder.on_miss(block, &self.recorder) {
            self.commit(e);
        }
        self.flags.miss_count_register = self.binder.open_len() as u64;
    }

    /// A demand L2 miss. Target-array misses are not recorded.
    pub fn on_l2_miss(&mut self, block: BlockAddress, vaddr: VirtualAddress) -> Result<(), ConfigError> {
        self.require_init()?;
        if self.classify(vaddr) == Region::Target {
            return Ok(());
        }
        self.record_miss(block);
        Ok(())
    }

    /// A demand L2 hit on a prefetched line. Under [`WriteBack::Consumed`]
    /// a block this iteration's replay issued is recorded like a miss.
    pub fn on_prefetched_hit(&mut self, block: BlockAddress, vaddr: VirtualAddress) -> Result<(), ConfigError> {
        self.require_init()?;
        if self.classify(vaddr) != Region::Target && self.replayed.remove(&block) {
            self.stats.writeback_misses += 1;
            self.record_miss(block);
        }
        Ok(())
    }

    pub fn on_update(&mut self) -> Result<(), ConfigError> {
        self.require_init()?;
        if self.target.is_none() || self.frontier.is_none() {
            return Err(ConfigError::invalid("trace", "Update before AddrTBase/AddrFBase"));
        }
        if let Some(e) = self.binder.close_window() {
            self.commit(e);
        }
        self.store.swap();
        self.replayed.clear();
        self.flags.prefetch_enabled = true;
        self.flags.miss_count_register = 0;
        self.recorder.reset();
        self.identifier.reset();
        self.cache.clear();
        self.frontier_buf.clear();
        self.stats.iterations += 1;
        self.sync_stats();
        Ok(())
    }

    fn sync_stats(&mut self) {
        self.stats.metadata = self.store.traffic();
        self.stats.peak_metadata_bytes = self.store.peak_bytes();
        self.stats.misses_dropped = self.binder.dropped();
        self.stats.window_histogram = self.binder.window_sizes().clone();
        self.stats.misses_recorded = self.stats.miss_count_histogram.iter().map(|(k, v)| k * v).sum();
    }

    /// Flushes the open window and frees the metadata buffers.
    pub fn on_end(&mut self) -> AmcStats {
        if let Some(e) = self.binder.close_window() {
            self.commit(e);
        }
        self.sync_stats();
        self.store.release();
        self.cache.clear();
        self.identifier.reset();
        self.stats.clone()
    }

    pub fn stats(&mut self) -> AmcStats {
        self.sync_stats();
        self.stats.clone()
    }

    /// Context-switch reset: all metadata is discarded and prefetching is
    /// disabled until the next Update.
    pub fn reset(&mut self) {
        self.binder.close_window();
        self.store.release();
        self.cache.clear();
        self.identifier.reset();
        self.recorder.reset();
        self.frontier_buf.clear();
        self.replayed.clear();
        self.flags.prefetch_enabled = false;
        self.flags.miss_count_register = 0;
    }

    /// Writes both metadata buffers under `dir`.
    pub fn dump_metadata(&self, dir: &Path) -> std::io::Result<()> {
        self.store.recording().dump(dir, "recording")?;
        self.store.prefetching().dump(dir, "prefetching")
    }
}
