//! On-chip window over the replaying index, advanced by frontier progress.

use std::collections::VecDeque;

use super::store::{IndexEntry, MetadataStore};

#[derive(Debug, Clone)]
pub struct IndexIdentifier {
    capacity: usize,
    window: VecDeque<IndexEntry>,
    cursor: usize,
    refills: u64,
}

impl IndexIdentifier {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, window: VecDeque::with_capacity(capacity), cursor: 0, refills: 0 }
    }

    pub fn window(&self) -> impl Iterator<Item = &IndexEntry> {
        self.window.iter()
    }

    /// Next index position to be fetched.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn refills(&self) -> u64 {
        self.refills
    }

    /// Empties the window and rewinds to the start of the index.
    pub fn reset(&mut self) {
        self.window.clear();
        self.cursor = 0;
    }

    fn refill(&mut self, store: &mut MetadataStore) -> bool {
        let batch = store.read_index(self.cursor, self.capacity);
        if batch.is_empty() {
            return false;
        }
        self.cursor += batch.len();
        self.refills += 1;
        self.window.extend(batch);
        true
    }

    /// Looks for entries whose latest trigger delta equals `target_delta`.
    /// Entries behind it are discarded; every consecutive match is returned
    /// and removed from the window. Refills when the window runs dry.
    pub fn probe(&mut self, target_delta: u64, store: &mut MetadataStore) -> Vec<IndexEntry> {
        let mut staged = Vec::new();
        loop {
            let Some(front) = self.window.front() else {
                if self.refill(store) {
                    continue;
                }
                return staged;
            };
            let d = front.trigger.latest;
            if d < target_delta && staged.is_empty() {
                self.window.pop_front();
            } else if d == target_delta {
                staged.push(self.window.pop_front().unwrap());
            } else {
                return staged;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::BlockAddress;
    use crate::amc::compress::compress;
    use crate::amc::recorder::Trigger;

    fn store_with(latests: &[u64]) -> MetadataStore {
        let mut s = MetadataStore::default();
        let c = compress(&[BlockAddress::new(1).unwrap()]).unwrap();
        for &l in latests {
            s.append(Trigger::single(l), 1, &c);
        }
        s.swap();
        s
    }

    #[test]
    fn hit_stages_run_and_invalidates_earlier() {
        let mut s = store_with(&[8, 16, 16, 24, 40]);
        let mut id = IndexIdentifier::new(100);
        let got = id.probe(16, &mut s);
        assert_eq!(got.len(), 2);
        assert_eq!(id.window().map(|e| e.trigger.latest).collect::<Vec<_>>(), vec![24, 40]);
        assert!(id.probe(32, &mut s).is_empty());
        assert_eq!(id.window().count(), 1);
        assert_eq!(id.probe(40, &mut s).len(), 1);
    }

    #[test]
    fn refills_in_batches_and_across_a_run() {
        let latests: Vec<u64> = (0..10).map(|i| if i < 4 { 8 } else { 8 + i }).collect();
        let mut s = store_with(&latests);
        let mut id = IndexIdentifier::new(3);
        assert_eq!(id.probe(8, &mut s).len(), 4);
        assert_eq!(id.refills(), 2);
        assert_eq!(id.probe(13, &mut s).len(), 1);
        assert!(id.probe(100, &mut s).is_empty());
        assert_eq!(id.cursor(), 10);
    }
}
