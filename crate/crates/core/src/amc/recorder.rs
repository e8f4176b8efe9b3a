//! Target recorder and the binder that groups L2 misses into windows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::addr::BlockAddress;

/// One or two target deltas that key a correlation entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trigger {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub older: Option<u64>,
    pub latest: u64,
}

impl Trigger {
    pub fn single(latest: u64) -> Self {
        Self { older: None, latest }
    }

    pub fn pair(older: u64, latest: u64) -> Self {
        Self { older: Some(older), latest }
    }
}

/// Holds the two most recent target deltas and the per-iteration access count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetRecorder {
    older: Option<u64>,
    latest: Option<u64>,
    access_count: u64,
}

impl TargetRecorder {
    pub fn push(&mut self, delta: u64) {
        self.older = self.latest;
        self.latest = Some(delta);
        self.access_count += 1;
    }

    pub fn trigger(&self) -> Option<Trigger> {
        self.latest.map(|latest| Trigger { older: self.older, latest })
    }

    pub fn access_count(&self) -> u64 {
        self.access_count
    }

    /// Clears the count and the recent deltas at an iteration boundary.
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Misses gathered between two target accesses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub trigger: Trigger,
    pub window_count: u64,
    pub misses: Vec<BlockAddress>,
}

/// Collects L2 misses into the open entry of the current window.
#[derive(Debug, Clone)]
pub struct Binder {
    cap: usize,
    open: Option<CorrelationEntry>,
    window_misses: u64,
    window_sizes: BTreeMap<u64, u64>,
    dropped: u64,
}

impl Binder {
    /// `cap` is the largest miss list per entry; longer windows are split.
    pub fn new(cap: usize) -> Self {
        assert!(cap > 0);
        Self { cap, open: None, window_misses: 0, window_sizes: BTreeMap::new(), dropped: 0 }
    }

    /// Misses in the open entry (the miss count register).
    pub fn open_len(&self) -> usize {
        self.open.as_ref().map_or(0, |e| e.misses.len())
    }

    /// Misses seen before any target access of the iteration.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Unsplit window sizes: miss count to number of windows.
    pub fn window_sizes(&self) -> &BTreeMap<u64, u64> {
        &self.window_sizes
    }

    /// Adds a non-target miss. Returns an entry when it filled up.
    pub fn on_miss(&mut self, block: BlockAddress, recorder: &TargetRecorder) -> Option<CorrelationEntry> {
        let Some(trigger) = recorder.trigger() else {
            self.dropped += 1;
            return None;
        };
        self.window_misses += 1;
        let open = self.open.get_or_insert_with(|| CorrelationEntry {
            trigger,
            window_count: recorder.access_count(),
            misses: Vec::with_capacity(self.cap),
        });
        open.misses.push(block);
        if open.misses.len() >= self.cap {
            self.open.take()
        } else {
            None
        }
    }

    /// Ends the current window and returns its unfinished entry.
    pub fn close_window(&mut self) -> Option<CorrelationEntry> {
        if self.window_misses > 0 {
            *self.window_sizes.entry(self.window_misses).or_default() += 1;
            self.window_misses = 0;
        }
        self.open.take()
    }

    pub fn reset(&mut self) {
        self.open = None;
        self.window_misses = 0;
        self.window_sizes.clear();
        self.dropped = 0;
    }
}
