//! The eight-vertex example used to explain access-to-miss correlation,
//! with per-access miss annotations.
//!
//! Every element occupies one cache line and V, N, P and F sit in four
//! consecutive pages. The first iteration's listing is truncated after
//! V[4]; its tail is filled with the accesses implied by the recorded
//! correlations for (V[5],V[6]) and (V[6],V[7]). Frontier loads F[v]
//! precede every V[v] (and stand in for inactive vertices) so the replay
//! machinery sees frontier progress; they never miss.

use std::path::Path;

use crate::addr::BlockAddress;
use crate::amc::Trigger;
use crate::error::SimError;
use crate::trace::{self, Directive, TraceEvent};
use crate::translate::Translation;

use super::graph::Graph;
use super::kernels::prologue;
use super::layout::{pc, LayoutPlan};

pub const V_BASE: u64 = 0x10000;
pub const N_BASE: u64 = 0x11000;
pub const P_BASE: u64 = 0x12000;
pub const F_BASE: u64 = 0x13000;
const LINE: u64 = 64;
const ELEMENTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureAccess {
    pub event: TraceEvent,
    pub miss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Array {
    V,
    N,
    P,
    F,
}

impl Array {
    pub fn base(self) -> u64 {
        match self {
            Array::V => V_BASE,
            Array::N => N_BASE,
            Array::P => P_BASE,
            Array::F => F_BASE,
        }
    }

    fn pc(self) -> u64 {
        match self {
            Array::V => pc::TARGET,
            Array::N => pc::NEIGHBOR,
            Array::P => pc::PROPERTY_LOAD,
            Array::F => pc::FRONTIER,
        }
    }

    pub fn addr(self, i: u64) -> u64 {
        self.base() + i * LINE
    }

    /// Block of element `i` under identity translation.
    pub fn block(self, i: u64) -> BlockAddress {
        Translation::Identity.translate(crate::addr::VirtualAddress(self.addr(i)))
    }
}

fn acc(a: Array, i: u64, miss: bool) -> FixtureAccess {
    FixtureAccess { event: TraceEvent::load(a.addr(i)).with_pc(a.pc()), miss }
}

/// Parses "V1 N2* ..." into accesses; `*` marks a miss.
fn listing(s: &str) -> Vec<FixtureAccess> {
    s.split_whitespace()
        .map(|tok| {
            let miss = tok.ends_with('*');
            let tok = tok.trim_end_matches('*');
            let a = match &tok[..1] {
                "V" => Array::V,
                "N" => Array::N,
                "P" => Array::P,
                "F" => Array::F,
                other => panic!("bad array {other}"),
            };
            acc(a, tok[1..].parse().unwrap(), miss)
        })
        .collect()
}

fn trig(older: Option<u64>, latest: u64) -> Trigger {
    Trigger { older: older.map(|o| o * LINE), latest: latest * LINE }
}

fn blocks(s: &str) -> Vec<BlockAddress> {
    listing(s).iter().map(|a| match a.event {
        TraceEvent::Access { vaddr, .. } => Translation::Identity.translate(vaddr),
        _ => unreachable!(),
    }).collect()
}

#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub layout: LayoutPlan,
    pub graph: Graph,
    pub iteration1: Vec<FixtureAccess>,
    pub iteration2: Vec<FixtureAccess>,
    /// Per-PC streams of the MISB-style table, interleaved, all misses.
    pub misb_training: Vec<FixtureAccess>,
    /// Correlations the binder must produce from `iteration1`.
    pub expected_entries: Vec<(Trigger, Vec<BlockAddress>)>,
    /// The correlation table as printed; its (V[2],V[3]) row lists four of
    /// the six misses the access listing implies.
    pub table_entries: Vec<(Trigger, Vec<BlockAddress>)>,
}

pub fn worked_example_fixture() -> WorkedExample {
    let region = |base| crate::addr::RegionDescriptor::new(base, ELEMENTS, LINE as u8).unwrap();
    let layout = LayoutPlan { v: region(V_BASE), n: region(N_BASE), p: region(P_BASE), f: region(F_BASE) };
    let graph = Graph::from_edges(
        8,
        &[(1, 2), (1, 3), (2, 1), (2, 3), (3, 4), (3, 5), (3, 6), (4, 3), (5, 6), (6, 3), (7, 5)],
    )
    .unwrap();
    let iteration1 = listing(
        "F1 V1 N2* P2* N3 P3* \
         F2 V2 N1 P1* N3 P3* \
         F3 V3 N4* P4* N5* P5* N6* P6* \
         F4 V4 N3 P3* \
         F5 V5 N6 P6 \
         F6 V6 N3* P3 \
         F7 V7 N5* P5",
    );
    let iteration2 = listing(
        "F1 V1* N2* P2* N3* P3* \
         F2 F3 \
         F4 V4* N3* P3* \
         F5 \
         F6 V6* N3* P3* \
         F7 V7* N5* P5*",
    );
    let a = "V1 V2 V3 V3 V4 V5 V6 V7";
    let b = "N1 N2 N4 N5 N6 N3 N7 N5";
    let c = "P1 P2 P4 P5 P6 P3 P7 P5";
    let (a, b, c): (Vec<_>, Vec<_>, Vec<_>) = (listing(a), listing(b), listing(c));
    let misb_training = (0..8)
        .flat_map(|i| [a[i], b[i], c[i]])
        .map(|x| FixtureAccess { miss: true, ..x })
        .collect();
    let expected_entries = vec![
        (trig(None, 1), blocks("N2 P2 P3")),
        (trig(Some(1), 2), blocks("P1 P3")),
        (trig(Some(2), 3), blocks("N4 P4 N5 P5 N6 P6")),
        (trig(Some(3), 4), blocks("P3")),
        (trig(Some(5), 6), blocks("N3")),
        (trig(Some(6), 7), blocks("N5")),
    ];
    let mut table_entries = expected_entries.clone();
    table_entries[2].1 = blocks("N4 P4 P5 N6");
    WorkedExample { layout, graph, iteration1, iteration2, misb_training, expected_entries, table_entries }
}

impl WorkedExample {
    fn assemble(&self, first: &[FixtureAccess], second: &[FixtureAccess]) -> (Vec<TraceEvent>, Vec<bool>) {
        let mut events = prologue(&self.layout);
        let mut flags = Vec::new();
        for part in [first, second] {
            for a in part {
                events.push(a.event);
                flags.push(a.miss);
            }
            events.push(TraceEvent::Directive(Directive::Update));
        }
        events.push(TraceEvent::Directive(Directive::End));
        (events, flags)
    }

    /// Both iterations of the listing with their miss flags.
    pub fn amc_trace(&self) -> (Vec<TraceEvent>, Vec<bool>) {
        self.assemble(&self.iteration1, &self.iteration2)
    }

    /// The per-PC training streams followed by the second iteration.
    pub fn misb_trace(&self) -> (Vec<TraceEvent>, Vec<bool>) {
        self.assemble(&self.misb_training, &self.iteration2)
    }

    /// Writes the traces as JSON lines with one-flag-per-line miss sidecars,
    /// the graph in CSR form and the expected correlations.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        for (stem, (events, flags)) in [("listing", self.amc_trace()), ("pc_streams", self.misb_trace())] {
            trace::write_file(&dir.join(format!("{stem}.trace.jsonl")), &events)?;
            let text: String = flags.iter().map(|&m| if m { "1\n" } else { "0\n" }).collect();
            std::fs::write(dir.join(format!("{stem}.misses.txt")), text)?;
        }
        self.graph.write_file(&dir.join("graph.csr"))?;
        let rows = |es: &[(Trigger, Vec<BlockAddress>)]| -> Vec<serde_json::Value> {
            es.iter()
                .map(|(t, ms)| {
                    serde_json::json!({
                        "older": t.older,
                        "latest": t.latest,
                        "misses": ms.iter().map(|b| format!("{:#x}", b.value())).collect::<Vec<_>>(),
                    })
                })
                .collect()
        };
        let doc = serde_json::json!({
            "expected_entries": rows(&self.expected_entries),
            "table_entries": rows(&self.table_entries),
        });
        std::fs::write(dir.join("entries.json"), serde_json::to_string_pretty(&doc).expect("plain json") + "\n")?;
        Ok(())
    }

    /// Misses of the second iteration with no prefetching.
    pub fn iteration2_misses(&self) -> usize {
        self.iteration2.iter().filter(|a| a.miss).count()
    }

    /// Target accesses of the second iteration.
    pub fn iteration2_targets(&self) -> Vec<u64> {
        self.iteration2
            .iter()
            .filter_map(|a| match a.event {
                TraceEvent::Access { vaddr, .. } if self.layout.v.contains(vaddr) => Some((vaddr.0 - V_BASE) / LINE),
                _ => None,
            })
            .collect()
    }
}
