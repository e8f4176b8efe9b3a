use serde::{Deserialize, Serialize};

use crate::addr::BLOCK_BYTES;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementPolicy {
    #[default]
    Lru,
    Fifo,
}

/// One cache level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub associativity: u32,
    pub hit_latency_cycles: u64,
    #[serde(default)]
    pub replacement: ReplacementPolicy,
}

impl CacheConfig {
    pub const fn new(capacity_bytes: u64, associativity: u32, hit_latency_cycles: u64) -> Self {
        Self { capacity_bytes, associativity, hit_latency_cycles, replacement: ReplacementPolicy::Lru }
    }

    /// Private L1D: 64 KiB, 8-way, 4 cycles.
    pub const fn l1d() -> Self {
        Self::new(64 * 1024, 8, 4)
    }

    /// Private L2: 256 KiB, 8-way, 12 cycles.
    pub const fn l2() -> Self {
        Self::new(256 * 1024, 8, 12)
    }

    pub fn sets(&self) -> u64 {
        self.capacity_bytes / (self.associativity as u64 * BLOCK_BYTES)
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if self.associativity == 0 {
            return Err(ConfigError::invalid(format!("{field}.associativity"), "must be > 0"));
        }
        let way_bytes = self.associativity as u64 * BLOCK_BYTES;
        if self.capacity_bytes == 0 || self.capacity_bytes % way_bytes != 0 {
            return Err(ConfigError::invalid(
                format!("{field}.capacity_bytes"),
                format!("{} is not a positive multiple of associativity x {BLOCK_BYTES}", self.capacity_bytes),
            ));
        }
        if !self.sets().is_power_of_two() {
            return Err(ConfigError::invalid(
                format!("{field}.capacity_bytes"),
                format!("set count {} is not a power of two", self.sets()),
            ));
        }
        Ok(())
    }
}

fn default_memory_latency() -> u64 {
    200
}

fn default_prefetch_queue() -> usize {
    16
}

/// Two (optionally three) non-inclusive levels over a flat memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub l1: CacheConfig,
    pub l2: CacheConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l3: Option<CacheConfig>,
    #[serde(default = "default_memory_latency")]
    pub memory_latency_cycles: u64,
    /// In-flight prefetch cap (the L2 MSHR count).
    #[serde(default = "default_prefetch_queue")]
    pub prefetch_queue: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            l1: CacheConfig::l1d(),
            l2: CacheConfig::l2(),
            l3: None,
            memory_latency_cycles: default_memory_latency(),
            prefetch_queue: default_prefetch_queue(),
        }
    }
}

impl HierarchyConfig {
    /// Scaled-down hierarchy for graphs of a few thousand vertices: 2 KiB
    /// 4-way L1 and 8 KiB 8-way L2, latencies unchanged.
    pub fn desk_scale() -> Self {
        Self { l1: CacheConfig::new(2 * 1024, 4, 4), l2: CacheConfig::new(8 * 1024, 8, 12), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.l1.validate("cache.l1")?;
        self.l2.validate("cache.l2")?;
        if let Some(l3) = &self.l3 {
            l3.validate("cache.l3")?;
        }
        if self.memory_latency_cycles == 0 {
            return Err(ConfigError::invalid("cache.memory_latency_cycles", "must be > 0"));
        }
        if self.prefetch_queue == 0 {
            return Err(ConfigError::invalid("cache.prefetch_queue", "must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_defaults_are_valid() {
        HierarchyConfig::default().validate().unwrap();
        HierarchyConfig::desk_scale().validate().unwrap();
        assert_eq!(CacheConfig::l1d().sets(), 128);
        assert_eq!(CacheConfig::l2().sets(), 512);
    }

    #[test]
    fn rejects_non_power_of_two_sets() {
        let err = CacheConfig::new(3 * 8 * 64, 8, 4).validate("cache.l1").unwrap_err();
        assert_eq!(err.field, "cache.l1.capacity_bytes");
        assert!(CacheConfig::new(1000, 8, 4).validate("x").is_err());
        assert!(CacheConfig::new(512, 0, 4).validate("x").is_err());
    }
}
