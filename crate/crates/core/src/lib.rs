//! Trace-driven cache simulator with an access-to-miss correlation (AMC)
//! prefetcher for evolving-graph workloads.

pub mod addr;
pub mod amc;
pub mod baselines;
pub mod cache;
pub mod error;
pub mod experiment;
pub mod prefetch;
pub mod report;
pub mod sim;
pub mod trace;
pub mod translate;
pub mod workload;

pub use addr::{BlockAddress, Region, RegionDescriptor, RegionMap, VirtualAddress};
pub use error::{CodecError, ConfigError, GraphError, SimError, TraceError};
pub use trace::{AccessKind, Directive, TraceEvent};
pub use translate::Translation;

/// PageRank-Delta parameters in double precision.
pub type PgdParams64 = workload::PgdParams<f64>;
/// PageRank-Delta parameters in single precision.
pub type PgdParams32 = workload::PgdParams<f32>;
