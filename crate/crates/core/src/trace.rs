//! Trace events and their binary / JSON-lines encodings.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! "AMCT" magic, u64 record count, then per record:
//!   tag u8: 0 load, 1 store, 2 init, 3 addr_t_base, 4 addr_f_base,
//!           5 update, 6 end, 7 reset; bit 0x80 on an access = PC follows
//!   access:      vaddr u64 [pc u64]
//!   *_base:      base u64, element_count u64, element_size u8
//! ```
//!
//! The JSON-lines form carries one event per line, e.g.
//! `{"kind":"load","vaddr":"0x1040","pc":"0xa"}` or
//! `{"kind":"addr_t_base","base":"0x1000","element_count":8,"element_size":8}`.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

use crate::addr::{RegionDescriptor, VirtualAddress};
use crate::error::TraceError;

pub const TRACE_MAGIC: &[u8; 4] = b"AMCT";
const PC_FLAG: u8 = 0x80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    Init,
    AddrTBase(RegionDescriptor),
    AddrFBase(RegionDescriptor),
    Update,
    End,
    /// Context-switch metadata reset. Never produced by the generators.
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Access { vaddr: VirtualAddress, kind: AccessKind, pc: Option<u64> },
    Directive(Directive),
}

impl TraceEvent {
    pub fn load(vaddr: u64) -> Self {
        Self::Access { vaddr: VirtualAddress(vaddr), kind: AccessKind::Load, pc: None }
    }

    pub fn store(vaddr: u64) -> Self {
        Self::Access { vaddr: VirtualAddress(vaddr), kind: AccessKind::Store, pc: None }
    }

    pub fn with_pc(self, pc: u64) -> Self {
        match self {
            Self::Access { vaddr, kind, .. } => Self::Access { vaddr, kind, pc: Some(pc) },
            d => d,
        }
    }

    pub fn is_access(&self) -> bool {
        matches!(self, Self::Access { .. })
    }
}

/// Checks the ordering rules a simulator relies on.
pub fn validate(events: &[TraceEvent]) -> Result<(), TraceError> {
    let ill = |m: String| Err(TraceError::IllFormed(m));
    let mut init = false;
    let (mut tbase, mut fbase) = (false, false);
    let mut ends = 0;
    for (i, ev) in events.iter().enumerate() {
        if ends > 0 {
            return ill(format!("event {i} follows End"));
        }
        match ev {
            TraceEvent::Access { .. } if !init => return ill(format!("access at event {i} precedes Init")),
            TraceEvent::Access { .. } => {}
            TraceEvent::Directive(Directive::Init) if init => return ill(format!("second Init at event {i}")),
            TraceEvent::Directive(Directive::Init) => init = true,
            TraceEvent::Directive(Directive::AddrTBase(r)) => {
                r.validate().map_err(|e| TraceError::IllFormed(format!("event {i}: {e}")))?;
                tbase = true
            }
            TraceEvent::Directive(Directive::AddrFBase(r)) => {
                r.validate().map_err(|e| TraceError::IllFormed(format!("event {i}: {e}")))?;
                fbase = true
            }
            TraceEvent::Directive(Directive::Update) if !(tbase && fbase) => {
                return ill(format!("Update at event {i} before both AddrTBase and AddrFBase"))
            }
            TraceEvent::Directive(Directive::End) => ends += 1,
            TraceEvent::Directive(_) if !init => return ill(format!("directive at event {i} precedes Init")),
            TraceEvent::Directive(_) => {}
        }
    }
    if !init {
        return ill("missing Init".into());
    }
    if ends != 1 {
        return ill("trace must end with exactly one End".into());
    }
    Ok(())
}

fn write_region(out: &mut Vec<u8>, r: &RegionDescriptor) {
    out.extend_from_slice(&r.base.0.to_le_bytes());
    out.extend_from_slice(&r.element_count.to_le_bytes());
    out.push(r.element_size);
}

pub fn encode(events: &[TraceEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + events.len() * 9);
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for ev in events {
        match ev {
            TraceEvent::Access { vaddr, kind, pc } => {
                let mut tag = match kind {
                    AccessKind::Load => 0,
                    AccessKind::Store => 1,
                };
                if pc.is_some() {
                    tag |= PC_FLAG;
                }
                out.push(tag);
                out.extend_from_slice(&vaddr.0.to_le_bytes());
                if let Some(pc) = pc {
                    out.extend_from_slice(&pc.to_le_bytes());
                }
            }
            TraceEvent::Directive(d) => match d {
                Directive::Init => out.push(2),
                Directive::AddrTBase(r) => {
                    out.push(3);
                    write_region(&mut out, r)
                }
                Directive::AddrFBase(r) => {
                    out.push(4);
                    write_region(&mut out, r)
                }
                Directive::Update => out.push(5),
                Directive::End => out.push(6),
                Directive::Reset => out.push(7),
            },
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8], TraceError> {
        if self.buf.len() - self.pos < n {
            return Err(TraceError::Truncated { offset: self.pos as u64, what });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, TraceError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn region(&mut self, record_at: usize) -> Result<RegionDescriptor, TraceError> {
        let base = self.u64("region base")?;
        let count = self.u64("region element_count")?;
        let size = self.take(1, "region element_size")?[0];
        let r = RegionDescriptor { base: VirtualAddress(base), element_count: count, element_size: size };
        r.validate()
            .map_err(|e| TraceError::Malformed { offset: record_at as u64, reason: e.to_string() })?;
        Ok(r)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<TraceEvent>, TraceError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != TRACE_MAGIC {
        return Err(TraceError::Malformed { offset: 0, reason: "missing AMCT magic".into() });
    }
    let count = c.u64("record count")?;
    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let at = c.pos;
        let tag = c.take(1, "record tag")?[0];
        let ev = match tag & !PC_FLAG {
            k @ (0 | 1) => {
                let vaddr = VirtualAddress(c.u64("access vaddr")?);
                let pc = if tag & PC_FLAG != 0 { Some(c.u64("access pc")?) } else { None };
                let kind = if k == 0 { AccessKind::Load } else { AccessKind::Store };
                TraceEvent::Access { vaddr, kind, pc }
            }
            _ if tag & PC_FLAG != 0 => return Err(TraceError::UnknownTag { offset: at as u64, tag }),
            2 => TraceEvent::Directive(Directive::Init),
            3 => TraceEvent::Directive(Directive::AddrTBase(c.region(at)?)),
            4 => TraceEvent::Directive(Directive::AddrFBase(c.region(at)?)),
            5 => TraceEvent::Directive(Directive::Update),
            6 => TraceEvent::Directive(Directive::End),
            7 => TraceEvent::Directive(Directive::Reset),
            _ => return Err(TraceError::UnknownTag { offset: at as u64, tag }),
        };
        events.push(ev);
    }
    if c.pos != bytes.len() {
        return Err(TraceError::Malformed { offset: c.pos as u64, reason: "trailing bytes after last record".into() });
    }
    Ok(events)
}

/// Hex-string wrapper used by the JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hex(u64);

impl Serialize for Hex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:#x}", self.0))
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(&s);
        u64::from_str_radix(digits, 16).map(Hex).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum JsonEvent {
    Load {
        vaddr: Hex,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pc: Option<Hex>,
    },
    Store {
        vaddr: Hex,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pc: Option<Hex>,
    },
    Init,
    AddrTBase { base: Hex, element_count: u64, element_size: u8 },
    AddrFBase { base: Hex, element_count: u64, element_size: u8 },
    Update,
    End,
    Reset,
}

impl From<&TraceEvent> for JsonEvent {
    fn from(ev: &TraceEvent) -> Self {
        match *ev {
            TraceEvent::Access { vaddr, kind: AccessKind::Load, pc } => {
                JsonEvent::Load { vaddr: Hex(vaddr.0), pc: pc.map(Hex) }
            }
            TraceEvent::Access { vaddr, kind: AccessKind::Store, pc } => {
                JsonEvent::Store { vaddr: Hex(vaddr.0), pc: pc.map(Hex) }
            }
            TraceEvent::Directive(Directive::Init) => JsonEvent::Init,
            TraceEvent::Directive(Directive::AddrTBase(r)) => JsonEvent::AddrTBase {
                base: Hex(r.base.0),
                element_count: r.element_count,
                element_size: r.element_size,
            },
            TraceEvent::Directive(Directive::AddrFBase(r)) => JsonEvent::AddrFBase {
                base: Hex(r.base.0),
                element_count: r.element_count,
                element_size: r.element_size,
            },
            TraceEvent::Directive(Directive::Update) => JsonEvent::Update,
            TraceEvent::Directive(Directive::End) => JsonEvent::End,
            TraceEvent::Directive(Directive::Reset) => JsonEvent::Reset,
        }
    }
}

impl JsonEvent {
    fn into_event(self) -> Result<TraceEvent, String> {
        let region = |base: Hex, element_count, element_size| {
            let r = RegionDescriptor { base: VirtualAddress(base.0), element_count, element_size };
            r.validate().map(|_| r).map_err(|e| e.to_string())
        };
        Ok(match self {
            JsonEvent::Load { vaddr, pc } => {
                TraceEvent::Access { vaddr: VirtualAddress(vaddr.0), kind: AccessKind::Load, pc: pc.map(|p| p.0) }
            }
            JsonEvent::Store { vaddr, pc } => {
                TraceEvent::Access { vaddr: VirtualAddress(vaddr.0), kind: AccessKind::Store, pc: pc.map(|p| p.0) }
            }
            JsonEvent::Init => TraceEvent::Directive(Directive::Init),
            JsonEvent::AddrTBase { base, element_count, element_size } => {
                TraceEvent::Directive(Directive::AddrTBase(region(base, element_count, element_size)?))
            }
            JsonEvent::AddrFBase { base, element_count, element_size } => {
                TraceEvent::Directive(Directive::AddrFBase(region(base, element_count, element_size)?))
            }
            JsonEvent::Update => TraceEvent::Directive(Directive::Update),
            JsonEvent::End => TraceEvent::Directive(Directive::End),
            JsonEvent::Reset => TraceEvent::Directive(Directive::Reset),
        })
    }
}

pub fn write_jsonl<W: Write>(mut w: W, events: &[TraceEvent]) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut w, &JsonEvent::from(ev))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: JsonEvent =
            serde_json::from_str(&line).map_err(|e| TraceError::Json { line: i + 1, reason: e.to_string() })?;
        events.push(ev.into_event().map_err(|reason| TraceError::Json { line: i + 1, reason })?);
    }
    Ok(events)
}

/// Reads either encoding, detected from the leading bytes.
pub fn read_any<R: Read>(mut r: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(TRACE_MAGIC) {
        decode(&bytes)
    } else {
        read_jsonl(bytes.as_slice())
    }
}

pub fn read_file(path: &std::path::Path) -> Result<Vec<TraceEvent>, TraceError> {
    read_any(std::fs::File::open(path)?)
}

/// Writes JSON lines for `.jsonl`/`.json` paths and the binary form otherwise.
pub fn write_file(path: &std::path::Path, events: &[TraceEvent]) -> std::io::Result<()> {
    let json = matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"));
    if json {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_jsonl(&mut w, events)?;
        w.flush()
    } else {
        std::fs::write(path, encode(events))
    }
}
