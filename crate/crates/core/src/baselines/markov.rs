use std::collections::{BTreeMap, HashMap};

use crate::addr::BlockAddress;
use crate::cache::AccessOutcome;
use crate::error::ConfigError;
use crate::prefetch::{AccessCtx, Prefetcher};

/// One successor per address, bounded with LRU eviction.
#[derive(Debug, Clone)]
pub struct MarkovTable {
    capacity: usize,
    map: HashMap<BlockAddress, (BlockAddress, u64)>,
    order: BTreeMap<u64, BlockAddress>,
    clock: u64,
}

impl MarkovTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, map: HashMap::new(), order: BTreeMap::new(), clock: 0 }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn touch(&mut self, key: BlockAddress) {
        self.clock += 1;
        if let Some((_, stamp)) = self.map.get_mut(&key) {
            self.order.remove(stamp);
            *stamp = self.clock;
            self.order.insert(self.clock, key);
        }
    }

    pub fn record(&mut self, from: BlockAddress, to: BlockAddress) {
        if self.map.contains_key(&from) {
            self.map.get_mut(&from).unwrap().0 = to;
            self.touch(from);
            return;
        }
        if self.map.len() >= self.capacity {
            let (_, victim) = self.order.pop_first().unwrap();
            self.map.remove(&victim);
        }
        self.clock += 1;
        self.map.insert(from, (to, self.clock));
        self.order.insert(self.clock, from);
    }

    pub fn successor(&mut self, of: BlockAddress) -> Option<BlockAddress> {
        let s = self.map.get(&of).map(|e| e.0);
        if s.is_some() {
            self.touch(of);
        }
        s
    }

    pub fn contains(&self, key: BlockAddress) -> bool {
        self.map.contains_key(&key)
    }
}

/// Address-to-address correlation over the L2 access stream.
#[derive(Debug, Clone)]
pub struct Markov {
    table: MarkovTable,
    prev: Option<BlockAddress>,
}

impl Markov {
    pub fn new(capacity: usize) -> Self {
        Self { table: MarkovTable::new(capacity), prev: None }
    }

    pub fn table(&self) -> &MarkovTable {
        &self.table
    }

    /// Records the predecessor edge, then predicts from `block`.
    pub fn train_and_predict(&mut self, block: BlockAddress) -> Vec<BlockAddress> {
        if let Some(p) = self.prev.replace(block) {
            self.table.record(p, block);
        }
        self.table.successor(block).into_iter().collect()
    }
}

impl Default for Markov {
    fn default() -> Self {
        Self::new(16 * 1024)
    }
}

impl Prefetcher for Markov {
    fn name(&self) -> &'static str {
        "markov"
    }

    fn degree(&self) -> usize {
        1
    }

    fn on_l2_access(&mut self, ctx: &AccessCtx, _: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(self.train_and_predict(ctx.block))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blk(v: u64) -> BlockAddress {
        BlockAddress::new(v).unwrap()
    }

    #[test]
    fn unseen_address_predicts_nothing() {
        let mut m = Markov::default();
        assert!(m.train_and_predict(blk(1)).is_empty());
    }

    #[test]
    fn cyclic_trace_is_fully_predicted() {
        let mut m = Markov::default();
        let cycle = [5u64, 9, 2, 77, 13];
        let (mut right, mut total) = (0, 0);
        for round in 0..10 {
            for (i, &b) in cycle.iter().enumerate() {
                let p = m.train_and_predict(blk(b));
                if round >= 2 {
                    total += 1;
                    if p == vec![blk(cycle[(i + 1) % cycle.len()])] {
                        right += 1;
                    }
                }
            }
        }
        assert_eq!(right, total);
    }

    #[test]
    fn lru_evicts_coldest_key() {
        let mut t = MarkovTable::new(2);
        t.record(blk(1), blk(2));
        t.record(blk(3), blk(4));
        t.successor(blk(1));
        t.record(blk(5), blk(6));
        assert!(t.contains(blk(1)) && t.contains(blk(5)) && !t.contains(blk(3)));
    }

    proptest! {
        #[test]
        fn never_exceeds_capacity(cap in 1usize..16, xs in prop::collection::vec(0u64..64, 0..300)) {
            let mut m = Markov::new(cap);
            for x in xs {
                let p = m.train_and_predict(blk(x));
                prop_assert!(p.len() <= 1);
                prop_assert!(m.table().len() <= cap);
            }
        }
    }
}
