//! The interface every prefetcher implements, and the AMC adapter.

use serde::{Deserialize, Serialize};

use crate::addr::{BlockAddress, VirtualAddress};
use crate::amc::{Amc, AmcStats, MetadataTraffic};
use crate::cache::AccessOutcome;
use crate::error::ConfigError;
use crate::trace::{AccessKind, Directive};

/// One demand access as seen by a prefetcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessCtx {
    pub vaddr: VirtualAddress,
    pub block: BlockAddress,
    pub pc: Option<u64>,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefetcherReport {
    pub metadata: MetadataTraffic,
    pub peak_metadata_bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amc: Option<AmcStats>,
}

pub trait Prefetcher {
    fn name(&self) -> &'static str;

    /// Most candidates returned for a single access.
    fn degree(&self) -> usize;

    fn on_directive(&mut self, _d: &Directive) -> Result<(), ConfigError> {
        Ok(())
    }

    /// Every L1 access, before the demand lookup.
    fn on_l1_access(&mut self, _ctx: &AccessCtx) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(Vec::new())
    }

    /// Accesses that missed L1, after the lookup.
    fn on_l2_access(&mut self, _ctx: &AccessCtx, _outcome: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(Vec::new())
    }

    fn report(&mut self) -> PrefetcherReport {
        PrefetcherReport::default()
    }
}

/// Drives [`Amc`]: looks up on L1 accesses and records L2 misses.
#[derive(Debug, Clone)]
pub struct AmcPrefetcher {
    pub amc: Amc,
    finished: Option<AmcStats>,
}

impl AmcPrefetcher {
    pub fn new(amc: Amc) -> Self {
        Self { amc, finished: None }
    }
}

impl Prefetcher for AmcPrefetcher {
    fn name(&self) -> &'static str {
        "amc"
    }

    fn degree(&self) -> usize {
        usize::MAX
    }

    fn on_directive(&mut self, d: &Directive) -> Result<(), ConfigError> {
        if let Directive::End = d {
            self.finished = Some(self.amc.on_end());
            return Ok(());
        }
        self.amc.on_directive(d)
    }

    fn on_l1_access(&mut self, ctx: &AccessCtx) -> Result<Vec<BlockAddress>, ConfigError> {
        self.amc.on_l1_access(ctx.vaddr)
    }

    fn on_l2_access(&mut self, ctx: &AccessCtx, outcome: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        if let Some(b) = outcome.l2_miss_block {
            self.amc.on_l2_miss(b, ctx.vaddr)?;
        } else if outcome.was_prefetched_hit {
            self.amc.on_prefetched_hit(ctx.block, ctx.vaddr)?;
        }
        Ok(Vec::new())
    }

    fn report(&mut self) -> PrefetcherReport {
        let s = match &self.finished {
            Some(s) => s.clone(),
            None => self.amc.stats(),
        };
        PrefetcherReport { metadata: s.metadata, peak_metadata_bytes: s.peak_metadata_bytes, amc: Some(s) }
    }
}
