//! Comparison prefetchers.

mod ip_stride;
mod markov;
mod next_line;
mod pc_temporal;

pub use ip_stride::IpStride;
pub use markov::{Markov, MarkovTable};
pub use next_line::NextLine;
pub use pc_temporal::{PcStreamTable, PcTemporalLite};
