use crate::addr::BlockAddress;
use crate::cache::AccessOutcome;
use crate::error::ConfigError;
use crate::prefetch::{AccessCtx, Prefetcher};

/// Prefetches the following block on every L2 access.
#[derive(Debug, Clone, Default)]
pub struct NextLine;

impl NextLine {
    pub fn on_miss(block: BlockAddress) -> Vec<BlockAddress> {
        block.next().into_iter().collect()
    }
}

impl Prefetcher for NextLine {
    fn name(&self) -> &'static str {
        "next_line"
    }

    fn degree(&self) -> usize {
        1
    }

    fn on_l2_access(&mut self, ctx: &AccessCtx, _: &AccessOutcome) -> Result<Vec<BlockAddress>, ConfigError> {
        Ok(Self::on_miss(ctx.block))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::MAX_BLOCK;

    #[test]
    fn successor_without_wrap() {
        assert_eq!(NextLine::on_miss(BlockAddress::new(0x41).unwrap()), vec![BlockAddress::new(0x42).unwrap()]);
        assert!(NextLine::on_miss(BlockAddress::new(MAX_BLOCK).unwrap()).is_empty());
    }
}
