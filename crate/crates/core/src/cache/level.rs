//! A single set-associative array.

use super::config::{CacheConfig, ReplacementPolicy};
use crate::addr::BlockAddress;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Line {
    pub block: u64,
    pub valid: bool,
    pub prefetched: bool,
    /// Opaque tag of the filling prefetch; meaningful while `prefetched`.
    pub tag: u32,
    pub last_touch: u64,
    pub inserted: u64,
}

/// A line pushed out by a fill.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Evicted {
    pub prefetched: bool,
    pub tag: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct CacheLevel {
    lines: Vec<Line>,
    ways: usize,
    set_mask: u64,
    policy: ReplacementPolicy,
    stamp: u64,
    pub hit_latency: u64,
}

impl CacheLevel {
    pub fn new(cfg: &CacheConfig) -> Self {
        let sets = cfg.sets() as usize;
        Self {
            lines: vec![Line::default(); sets * cfg.associativity as usize],
            ways: cfg.associativity as usize,
            set_mask: sets as u64 - 1,
            policy: cfg.replacement,
            stamp: 0,
            hit_latency: cfg.hit_latency_cycles,
        }
    }

    fn set(&self, block: BlockAddress) -> std::ops::Range<usize> {
        let s = (block.value() & self.set_mask) as usize * self.ways;
        s..s + self.ways
    }

    fn find(&self, block: BlockAddress) -> Option<usize> {
        self.set(block).find(|&i| self.lines[i].valid && self.lines[i].block == block.value())
    }

    pub fn contains(&self, block: BlockAddress) -> bool {
        self.find(block).is_some()
    }

    /// Looks up and, on a hit, refreshes recency. Returns the line state
    /// before the access.
    pub fn access(&mut self, block: BlockAddress) -> Option<Line> {
        let i = self.find(block)?;
        self.stamp += 1;
        let before = self.lines[i];
        self.lines[i].last_touch = self.stamp;
        Some(before)
    }

    /// Clears the prefetched bit of a resident line.
    pub fn mark_demanded(&mut self, block: BlockAddress) {
        if let Some(i) = self.find(block) {
            self.lines[i].prefetched = false;
        }
    }

    /// Installs `block`, evicting a victim when the set is full. A resident
    /// block is only refreshed.
    pub fn fill(&mut self, block: BlockAddress, prefetched: Option<u32>) -> Option<Evicted> {
        self.stamp += 1;
        if let Some(i) = self.find(block) {
            self.lines[i].last_touch = self.stamp;
            return None;
        }
        let range = self.set(block);
        let slot = match range.clone().find(|&i| !self.lines[i].valid) {
            Some(i) => i,
            None => match self.policy {
                ReplacementPolicy::Lru => range.min_by_key(|&i| self.lines[i].last_touch).unwrap(),
                ReplacementPolicy::Fifo => range.min_by_key(|&i| self.lines[i].inserted).unwrap(),
            },
        };
        let old = self.lines[slot];
        self.lines[slot] = Line {
            block: block.value(),
            valid: true,
            prefetched: prefetched.is_some(),
            tag: prefetched.unwrap_or(0),
            last_touch: self.stamp,
            inserted: self.stamp,
        };
        old.valid.then_some(Evicted { prefetched: old.prefetched, tag: old.tag })
    }

    pub fn lines(&self) -> impl Iterator<Item = &Line> {
        self.lines.iter().filter(|l| l.valid)
    }
}
