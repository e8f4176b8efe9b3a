use std::collections::HashMap;

use crate::addr::BlockAddress;
use crate::cache::AccessOutcome;
use crate::error::ConfigError;
use crate::prefetch::{AccessCtx, Prefetcher};
use crate::trace::Directive;

#[derive(Debug, Clone, Default)]
struct Stream {
    blocks: Vec<BlockAddress>,
    last_seen: HashMap<BlockAddress, usize>,
}

impl Stream {
    fn push(&mut self, b: BlockAddress) {
        self.last_seen.insert(b, self.blocks.len());
        self.blocks.push(b);
    }
}

/// Per-PC address streams. The streams recorded in one iteration predict
/// the next one.
#[derive(Debug, Clone, Default)]
pub struct PcStreamTable {
    capacity: usize,
    current: HashMap<u64, Stream>,
    prior: HashMap<u64, Stream>,
}

impl PcStreamTable {
    /// `capacity` bounds each PC's stream.
    pub fn new(capacity: usize) -> Self {
        Self { capacity, ..Self::default() }
    }

    pub fn train(&mut self, pc: u64, block: BlockAddress) {
        let s = self.current.entry(pc).or_default();
        if s.blocks.len() < self.capacity {
            s.push(block);
        }
    }

    /// The `n` blocks that followed the latest occurrence of `block` in
    /// `pc`'s previous-iteration stream.
    pub fn predict(&self, pc: u64, block: BlockAddress, n: usize) -> Vec<BlockAddress> {
        let Some(s) = self.prior.get(&pc) else {
            return Vec::new();
        };
        match s.last_seen.get(&block) {
            Some(&i) => s.blocks[i + 1..].iter().take(n).copied().collect(),
            None => Vec::new(),
        }
    }

    pub fn stream(&self, pc: u64) -> &[BlockAddress] {
        self.current.get(&pc).map_or(&[], |s| &s.blocks)
    }

    pub fn prior_stream(&self, pc: u64) -> &[BlockAddress] {
        self.prior.get(&pc).map_or(&[], |s| &s.blocks)
    }

    pub fn rotate(&mut self) {
        self.prior = std::mem::take(&mut self.current);
    }
}

/// A PC-localized temporal prefetcher in the style of ISB/MISB.
#[derive(Debug, Clone)]
pub struct PcTemporalLite {
    degree: usize,
    table: PcStreamTable,
}

impl PcTemporalLite {
    pub fn new(degree: usize, capacity: usize) -> Self {
        Self { degree, table: PcStreamTable::new(capacity) }
    }

    pub fn table(&self) -> &PcStreamTable {
        &self.table
    }

    pub fn train_and_predict(&mut self, pc: u64, block: BlockAddress) -> Vec<BlockAddress> {
        let out = self.table.predict(pc, block, self.degree);
        self.table.train(pc, block);
        out
    }
}

impl Default for PcTemporalLite {
    fn default() -> Self {
        Self::new(1, 1 << 20)
    }
}

impl Prefetcher for PcTemporalLite {
    fn name(&self) -> &'static str {
        "pc_temporal_lite"
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn on_directive(&mut self, d: &Directive) -> Result<(), ConfigError> {
        if let Directive::Update = d {
            self.table.rotate();
        }
        Ok(())
    }

    fn on_l2_access(&mut self, ctx: &AccessCtx, _: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(match ctx.pc {
            Some(pc) => self.train_and_predict(pc, ctx.block),
            None => Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blk(v: u64) -> BlockAddress {
        BlockAddress::new(v).unwrap()
    }

    #[test]
    fn predicts_from_the_previous_iteration_only() {
        let mut p = PcTemporalLite::new(2, 100);
        for b in [1, 2, 3, 2, 5] {
            assert!(p.train_and_predict(7, blk(b)).is_empty());
        }
        p.table.rotate();
        // latest occurrence of 2 is followed by 5 only
        assert_eq!(p.train_and_predict(7, blk(2)), vec![blk(5)]);
        assert_eq!(p.train_and_predict(7, blk(1)), vec![blk(2), blk(3)]);
        assert!(p.train_and_predict(8, blk(1)).is_empty());
        assert!(p.train_and_predict(7, blk(99)).is_empty());
    }

    #[test]
    fn streams_are_capped() {
        let mut t = PcStreamTable::new(3);
        for b in 0..10 {
            t.train(1, blk(b));
        }
        assert_eq!(t.stream(1).len(), 3);
    }
}
