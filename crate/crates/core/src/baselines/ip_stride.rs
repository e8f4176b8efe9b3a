use std::collections::HashMap;

use crate::addr::BlockAddress;
use crate::cache::AccessOutcome;
use crate::error::ConfigError;
use crate::prefetch::{AccessCtx, Prefetcher};

#[derive(Debug, Clone, Copy)]
struct StrideEntry {
    last: u64,
    stride: i64,
    confirmations: u32,
    touched: u64,
}

/// Per-PC constant-stride detection.
#[derive(Debug, Clone)]
pub struct IpStride {
    degree: usize,
    confirmations: u32,
    capacity: usize,
    table: HashMap<u64, StrideEntry>,
    clock: u64,
}

impl IpStride {
    pub fn new(degree: usize, confirmations: u32, capacity: usize) -> Self {
        Self { degree, confirmations, capacity, table: HashMap::new(), clock: 0 }
    }

    pub fn train_and_predict(&mut self, pc: u64, block: BlockAddress) -> Vec<BlockAddress> {
        self.clock += 1;
        let b = block.value();
        let Some(e) = self.table.get_mut(&pc) else {
            if self.table.len() >= self.capacity {
                let victim = *self.table.iter().min_by_key(|(_, e)| e.touched).unwrap().0;
                self.table.remove(&victim);
            }
            self.table.insert(pc, StrideEntry { last: b, stride: 0, confirmations: 0, touched: self.clock });
            return Vec::new();
        };
        let stride = b as i64 - e.last as i64;
        if stride != 0 && stride == e.stride {
            e.confirmations += 1;
        } else {
            e.stride = stride;
            e.confirmations = 0;
        }
        e.last = b;
        e.touched = self.clock;
        if e.confirmations < self.confirmations {
            return Vec::new();
        }
        (1..=self.degree as i64).map_while(|i| block.offset(stride * i)).collect()
    }
}

impl Default for IpStride {
    fn default() -> Self {
        Self::new(4, 2, 256)
    }
}

impl Prefetcher for IpStride {
    fn name(&self) -> &'static str {
        "ip_stride"
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn on_l2_access(&mut self, ctx: &AccessCtx, _: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(match ctx.pc {
            Some(pc) => self.train_and_predict(pc, ctx.block),
            None => Vec::new(),
        })
    }
}
