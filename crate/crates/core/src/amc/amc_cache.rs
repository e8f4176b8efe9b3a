//! Content-addressed on-chip cache of compressed entries, stored in a
//! fixed-size ring and replaced in insertion order.

use std::collections::VecDeque;

use super::compress::CompressionMode;
use super::recorder::Trigger;

/// Which recorder deltas are compared against cached triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupRule {
    /// Only the newest target delta probes the tags.
    Latest,
    /// Both recorder deltas probe; newest-delta matches rank first.
    #[default]
    RecorderPair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedEntry {
    pub trigger: Trigger,
    pub valid: bool,
    pub mode: CompressionMode,
    pub miss_count: u8,
    offset: usize,
    len: usize,
}

/// How a cached entry matched the recorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchClass {
    FullPair,
    Latest,
    Older,
}

#[derive(Debug, Clone)]
pub struct AmcCache {
    ram: Vec<u8>,
    max_entries: usize,
    head: usize,
    used: usize,
    entries: VecDeque<CachedEntry>,
    evictions: u64,
}

impl AmcCache {
    pub fn new(bytes: usize, max_entries: usize) -> Self {
        assert!(bytes > 0 && max_entries > 0);
        Self { ram: vec![0; bytes], max_entries, head: 0, used: 0, entries: VecDeque::new(), evictions: 0 }
    }

    pub fn capacity_bytes(&self) -> usize {
        self.ram.len()
    }

    pub fn occupied_bytes(&self) -> usize {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    /// Entries oldest first.
    pub fn entries(&self) -> impl Iterator<Item = &CachedEntry> {
        self.entries.iter()
    }

    fn evict_oldest(&mut self) {
        if let Some(e) = self.entries.pop_front() {
            self.head = (e.offset + e.len) % self.ram.len();
            self.used -= e.len;
            self.evictions += 1;
        }
    }

    /// Inserts at the tail, evicting from the head as needed. Payloads
    /// larger than the whole ring are not cached.
    pub fn insert(&mut self, trigger: Trigger, mode: CompressionMode, miss_count: u8, payload: &[u8]) -> bool {
        let cap = self.ram.len();
        if payload.len() > cap {
            return false;
        }
        while self.entries.len() >= self.max_entries || cap - self.used < payload.len() {
            self.evict_oldest();
        }
        let offset = (self.head + self.used) % cap;
        for (i, b) in payload.iter().enumerate() {
            self.ram[(offset + i) % cap] = *b;
        }
        self.used += payload.len();
        self.entries.push_back(CachedEntry { trigger, valid: true, mode, miss_count, offset, len: payload.len() });
        true
    }

    pub fn payload(&self, i: usize) -> Vec<u8> {
        let e = &self.entries[i];
        (0..e.len).map(|k| self.ram[(e.offset + k) % self.ram.len()]).collect()
    }

    pub fn entry(&self, i: usize) -> &CachedEntry {
        &self.entries[i]
    }

    pub fn invalidate(&mut self, i: usize) {
        self.entries[i].valid = false;
    }

    /// Valid entries matching the recorder, best class first and FIFO order
    /// within a class.
    pub fn lookup(&self, older: Option<u64>, latest: u64, rule: LookupRule) -> Vec<(MatchClass, usize)> {
        let mut hits: Vec<(MatchClass, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.valid)
            .filter_map(|(i, e)| {
                let t = e.trigger;
                if t.latest == latest {
                    let full = older.is_some() && t.older == older;
                    Some((if full { MatchClass::FullPair } else { MatchClass::Latest }, i))
                } else if rule == LookupRule::RecorderPair && Some(t.latest) == older {
                    Some((MatchClass::Older, i))
                } else {
                    None
                }
            })
            .collect();
        hits.sort_by_key(|&(c, i)| (c, i));
        hits
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.head = 0;
        self.used = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction_by_count_and_bytes() {
        let mut c = AmcCache::new(100, 3);
        for i in 0..4 {
            c.insert(Trigger::single(i), CompressionMode::Delta1, 1, &[i as u8; 7]);
        }
        assert_eq!(c.entries().map(|e| e.trigger.latest).collect::<Vec<_>>(), vec![1, 2, 3]);
        c.insert(Trigger::single(9), CompressionMode::Raw, 1, &[9; 90]);
        assert_eq!(c.entries().map(|e| e.trigger.latest).collect::<Vec<_>>(), vec![3, 9]);
        assert!(c.occupied_bytes() <= 100);
        assert_eq!(c.payload(1), vec![9; 90]);
        assert_eq!(c.evictions(), 3);
    }

    #[test]
    fn ring_wraps_payloads() {
        let mut c = AmcCache::new(10, 10);
        c.insert(Trigger::single(0), CompressionMode::Delta1, 1, &[1; 6]);
        c.insert(Trigger::single(1), CompressionMode::Delta1, 1, &[2, 3, 4, 5, 6, 7]);
        assert_eq!(c.len(), 1);
        assert_eq!(c.payload(0), vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn ranking_full_then_latest_then_older() {
        let mut c = AmcCache::new(1000, 10);
        c.insert(Trigger::single(8), CompressionMode::Delta1, 1, &[0; 7]);
        c.insert(Trigger::pair(0, 16), CompressionMode::Delta1, 1, &[0; 7]);
        c.insert(Trigger::pair(8, 16), CompressionMode::Delta1, 1, &[0; 7]);
        c.insert(Trigger::pair(0, 24), CompressionMode::Delta1, 1, &[0; 7]);
        let hits = c.lookup(Some(8), 16, LookupRule::RecorderPair);
        assert_eq!(hits, vec![(MatchClass::FullPair, 2), (MatchClass::Latest, 1), (MatchClass::Older, 0)]);
        assert_eq!(c.lookup(Some(8), 16, LookupRule::Latest).len(), 2);
        c.invalidate(2);
        assert_eq!(c.lookup(Some(8), 16, LookupRule::Latest), vec![(MatchClass::Latest, 1)]);
    }
}
