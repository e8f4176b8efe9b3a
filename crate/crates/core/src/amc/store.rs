//! Double-buffered off-chip metadata: a miss region of packed compressed
//! entries and an index region, one pair recording and one replaying.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::compress::{CompressedEntry, CompressionMode};
use super::recorder::Trigger;
use crate::addr::BLOCK_BYTES;

/// Bytes charged per index entry.
pub const INDEX_ENTRY_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub trigger: Trigger,
    pub window_count: u64,
    pub mode: CompressionMode,
    pub miss_count: u8,
    pub miss_offset: u64,
}

impl IndexEntry {
    pub fn payload_bytes(&self) -> u64 {
        self.mode.encoded_bits(self.miss_count as usize).div_ceil(8) as u64
    }
}

/// Off-chip transfer totals. Lines are 64-byte DRAM accesses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataTraffic {
    pub bytes_written: u64,
    pub bytes_read: u64,
    pub lines_written: u64,
    pub lines_read: u64,
}

/// Appends that share a line are charged once.
#[derive(Debug, Clone, Default)]
struct AppendLines {
    counted: u64,
}

impl AppendLines {
    fn charge(&mut self, start: u64, len: u64) -> u64 {
        if len == 0 {
            return 0;
        }
        let last = (start + len - 1) / BLOCK_BYTES + 1;
        let first = start / BLOCK_BYTES;
        let new = last.saturating_sub(self.counted.max(first));
        self.counted = self.counted.max(last);
        new
    }
}

fn lines_spanned(start: u64, len: u64) -> u64 {
    if len == 0 {
        0
    } else {
        (start + len - 1) / BLOCK_BYTES - start / BLOCK_BYTES + 1
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetadataBuffer {
    misses: Vec<u8>,
    index: Vec<IndexEntry>,
    miss_lines: AppendLines,
    index_lines: AppendLines,
}

impl MetadataBuffer {
    pub fn index(&self) -> &[IndexEntry] {
        &self.index
    }

    pub fn miss_region(&self) -> &[u8] {
        &self.misses
    }

    pub fn bytes(&self) -> u64 {
        self.misses.len() as u64 + self.index.len() as u64 * INDEX_ENTRY_BYTES
    }

    fn clear(&mut self) {
        *self = Self::default();
    }

    /// Writes the index as JSON lines, the miss region as raw bytes and a
    /// sidecar listing each entry's offset and length.
    pub fn dump(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut idx = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.index.jsonl")))?);
        for e in &self.index {
            serde_json::to_writer(&mut idx, e)?;
            idx.write_all(b"\n")?;
        }
        idx.flush()?;
        std::fs::write(dir.join(format!("{stem}.misses.bin")), &self.misses)?;
        let mut side = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.offsets.csv")))?);
        writeln!(side, "entry,offset,bytes,mode,count")?;
        for (i, e) in self.index.iter().enumerate() {
            writeln!(side, "{i},{},{},{},{}", e.miss_offset, e.payload_bytes(), e.mode.bits(), e.miss_count)?;
        }
        side.flush()
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetadataStore {
    buffers: [MetadataBuffer; 2],
    recording: usize,
    traffic: MetadataTraffic,
    peak_bytes: u64,
}

impl MetadataStore {
    pub fn recording(&self) -> &MetadataBuffer {
        &self.buffers[self.recording]
    }

    pub fn prefetching(&self) -> &MetadataBuffer {
        &self.buffers[1 - self.recording]
    }

    pub fn traffic(&self) -> MetadataTraffic {
        self.traffic
    }

    /// Largest combined size of both buffers so far.
    pub fn peak_bytes(&self) -> u64 {
        self.peak_bytes
    }

    pub fn current_bytes(&self) -> u64 {
        self.buffers[0].bytes() + self.buffers[1].bytes()
    }

    /// Appends an entry to the recording buffer.
    pub fn append(&mut self, trigger: Trigger, window_count: u64, c: &CompressedEntry) -> IndexEntry {
        self.append_raw(trigger, window_count, c.mode, c.count, &c.payload)
    }

    pub fn append_raw(
        &mut self,
        trigger: Trigger,
        window_count: u64,
        mode: CompressionMode,
        miss_count: u8,
        payload: &[u8],
    ) -> IndexEntry {
        let buf = &mut self.buffers[self.recording];
        let off = buf.misses.len() as u64;
        buf.misses.extend_from_slice(payload);
        let entry = IndexEntry { trigger, window_count, mode, miss_count, miss_offset: off };
        let idx_off = buf.index.len() as u64 * INDEX_ENTRY_BYTES;
        buf.index.push(entry);
        let len = payload.len() as u64;
        self.traffic.bytes_written += len + INDEX_ENTRY_BYTES;
        self.traffic.lines_written +=
            buf.miss_lines.charge(off, len) + buf.index_lines.charge(idx_off, INDEX_ENTRY_BYTES);
        self.peak_bytes = self.peak_bytes.max(self.current_bytes());
        entry
    }

    /// Reads index entries `[from, from + n)` of the prefetching buffer.
    pub fn read_index(&mut self, from: usize, n: usize) -> Vec<IndexEntry> {
        let idx = &self.buffers[1 - self.recording].index;
        let from = from.min(idx.len());
        let to = (from + n).min(idx.len());
        let out = idx[from..to].to_vec();
        let bytes = out.len() as u64 * INDEX_ENTRY_BYTES;
        self.traffic.bytes_read += bytes;
        self.traffic.lines_read += lines_spanned(from as u64 * INDEX_ENTRY_BYTES, bytes);
        out
    }

    /// Reads the compressed payload an index entry points at.
    pub fn read_payload(&mut self, e: &IndexEntry) -> Vec<u8> {
        let region = &self.buffers[1 - self.recording].misses;
        let len = e.payload_bytes();
        let out = region[e.miss_offset as usize..(e.miss_offset + len) as usize].to_vec();
        self.traffic.bytes_read += len;
        self.traffic.lines_read += lines_spanned(e.miss_offset, len);
        out
    }

    /// Exchanges roles and empties the new recording buffer.
    pub fn swap(&mut self) {
        self.recording = 1 - self.recording;
        self.buffers[self.recording].clear();
    }

    /// Drops both buffers (context switch or end of run). Counters stay.
    pub fn release(&mut self) {
        self.buffers[0].clear();
        self.buffers[1].clear();
    }
}
