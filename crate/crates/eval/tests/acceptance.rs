//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use amc_core::amc::{compress, Binder, CompressionMode, TargetRecorder, Trigger};
use amc_core::baselines::{Markov, PcTemporalLite};
use amc_core::cache::{Hierarchy, HierarchyConfig};
use amc_core::experiment::{
    run_experiment, run_experiment_detailed, run_many, sweep_miss_size, ExperimentSpec, PrefetcherSpec,
};
use amc_core::report::ReportRow;
use amc_core::sim::{simulate, SimOptions};
use amc_core::workload::fixture::{Array, FixtureAccess, F_BASE, V_BASE};
use amc_core::workload::{worked_example_fixture, ActivePolicy, FixtureTraining, Kernel, WorkloadSpec};
use amc_core::{BlockAddress, Directive, TraceEvent, Translation, VirtualAddress};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn blk(v: u64) -> BlockAddress {
    BlockAddress::new(v).unwrap()
}

// --- 1: encoded sizes -------------------------------------------------------

fn compression_sizes() -> Outcome {
    let base = 0x1234_5678u64;
    let mut got = vec![];
    for (spread, mode) in [(100i64, CompressionMode::Delta1), (30_000, CompressionMode::Delta2), (2_000_000_000, CompressionMode::Delta4)] {
        // first delta is zero, the last one needs the full width
        let misses: Vec<_> = (0..20).map(|i| blk((base as i64 + spread * i / 19) as u64)).collect();
        let c = compress(&misses).map_err(|e| e.to_string())?;
        if c.mode != mode {
            return Err(format!("spread {spread}: picked {:?}", c.mode));
        }
        if c.payload.len() != c.bit_len().div_ceil(8) {
            return Err(format!("{mode:?}: payload {} bytes for {} bits", c.payload.len(), c.bit_len()));
        }
        got.push(c.bit_len());
    }
    got.push(CompressionMode::Raw.encoded_bits(20));
    check(got == [206, 366, 686, 920], format!("bits {got:?}, ratio {:.2}", 920.0 / 206.0))
}

// --- 2: round trips ---------------------------------------------------------

fn round_trips() -> Outcome {
    const TOP: i64 = (1 << 46) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut per_mode = [0u32; 4];
    for n in 0..10_000 {
        let want = CompressionMode::ALL[n % 4];
        let count = rng.gen_range(1..=31);
        let base = rng.gen_range(0..=TOP);
        let misses: Vec<_> = (0..count)
            .map(|_| {
                let v = match want.delta_bytes() {
                    Some(k) => {
                        let lim = (1i64 << (8 * k - 1)) - 1;
                        (base + rng.gen_range(-lim..=lim)).clamp(0, TOP)
                    }
                    None => rng.gen_range(0..=TOP),
                };
                blk(v as u64)
            })
            .collect();
        let c = compress(&misses).map_err(|e| format!("list {n}: {e}"))?;
        per_mode[c.mode.bits() as usize] += 1;
        let back = c.decompress().map_err(|e| format!("list {n}: {e}"))?;
        if back != misses {
            return Err(format!("list {n} ({:?}) did not round-trip", c.mode));
        }
    }
    check(per_mode.iter().all(|&m| m > 0), format!("10000 lists, per mode {per_mode:?}"))
}

// --- 3: binder on the first iteration ---------------------------------------

fn delta_of_target(a: &FixtureAccess) -> Option<u64> {
    match a.event {
        TraceEvent::Access { vaddr, .. } if (V_BASE..V_BASE + 8 * 64).contains(&vaddr.0) => Some(vaddr.0 - V_BASE),
        _ => None,
    }
}

fn block_of(a: &FixtureAccess) -> BlockAddress {
    match a.event {
        TraceEvent::Access { vaddr, .. } => Translation::Identity.translate(vaddr),
        _ => unreachable!(),
    }
}

fn binder_recording() -> Outcome {
    let w = worked_example_fixture();
    let mut rec = TargetRecorder::default();
    let mut binder = Binder::new(20);
    let mut entries = vec![];
    for a in &w.iteration1 {
        if let Some(d) = delta_of_target(a) {
            entries.extend(binder.close_window());
            rec.push(d);
        } else if a.miss {
            entries.extend(binder.on_miss(block_of(a), &rec));
        }
    }
    entries.extend(binder.close_window());
    let got: Vec<(Trigger, Vec<BlockAddress>)> = entries.into_iter().map(|e| (e.trigger, e.misses)).collect();
    let head = [
        (Trigger::single(64), vec![Array::N.block(2), Array::P.block(2), Array::P.block(3)]),
        (Trigger::pair(64, 128), vec![Array::P.block(1), Array::P.block(3)]),
    ];
    let v23 = got.iter().find(|(t, _)| *t == Trigger::pair(128, 192)).map(|(_, m)| m.len());
    check(
        got.len() >= 2 && got[..2] == head && got == w.expected_entries && v23 == Some(6) && got[2] != w.table_entries[2],
        format!("{} entries, (V2,V3) row holds {:?} misses", got.len(), v23),
    )
}

// --- 4: AMC replay on the second iteration ----------------------------------

/// Replays the second iteration against the hand-written correlations:
/// each target access issues, in order, entries keyed by the full pair,
/// then by the latest target alone, then entries whose latest target is the
/// recorder's older one. A prefetched block covers the next demand miss to
/// it and is consumed.
fn brute_force_replay() -> (u64, u64, u64) {
    let w = worked_example_fixture();
    let entries = &w.expected_entries;
    let mut latest: Option<u64> = None;
    let mut pending: HashMap<BlockAddress, u32> = HashMap::new();
    let (mut issued, mut useful, mut misses) = (0, 0, 0);
    for a in &w.iteration2 {
        if let Some(d) = delta_of_target(a) {
            let older = latest;
            latest = Some(d);
            let mut cands: Vec<BlockAddress> = vec![];
            let full = entries.iter().filter(|(t, _)| t.older == older && Some(t.latest) == latest);
            let last = entries.iter().filter(|(t, _)| Some(t.latest) == latest && t.older != older);
            let prev = entries.iter().filter(|(t, _)| older.is_some() && Some(t.latest) == older);
            for (_, ms) in full.chain(last).chain(prev) {
                for m in ms {
                    if !cands.contains(m) {
                        cands.push(*m);
                    }
                }
            }
            for c in cands {
                issued += 1;
                *pending.entry(c).or_default() += 1;
            }
        }
        if a.miss {
            misses += 1;
            let b = block_of(a);
            if let Some(n) = pending.get_mut(&b).filter(|n| **n > 0) {
                *n -= 1;
                useful += 1;
            }
        }
    }
    (issued, useful, misses)
}

fn amc_replay() -> Outcome {
    let (issued, useful, misses) = brute_force_replay();
    let spec = ExperimentSpec::new(WorkloadSpec::worked_example(FixtureTraining::Listing), PrefetcherSpec::named("amc"), 0);
    let r = run_experiment(&spec).map_err(|e| e.to_string())?;
    let pinned = (r.prefetches_issued, r.useful + r.useful_late, r.demand_misses_baseline) == (10, 7, 14);
    let oracle = (r.prefetches_issued, r.useful + r.useful_late, r.demand_misses_baseline) == (issued, useful, misses);
    let band = (r.accuracy - 0.60).abs() <= 0.15 && (r.coverage - 0.43).abs() <= 0.15;
    check(
        pinned && oracle && band && r.accuracy == 0.7 && r.coverage == 0.5,
        format!(
            "accuracy {:.3} coverage {:.3} (oracle {useful}/{issued}, {useful}/{misses})",
            r.accuracy, r.coverage
        ),
    )
}

// --- 5: baselines on the same fixture ---------------------------------------

fn baseline_contrast() -> Outcome {
    let mut best: Option<(f64, usize, ReportRow)> = None;
    for d in [1, 2, 4] {
        let spec = ExperimentSpec::new(
            WorkloadSpec::worked_example(FixtureTraining::PcStreams),
            PrefetcherSpec::named("pc_temporal_lite").with_degree(d),
            0,
        );
        let r = run_experiment(&spec).map_err(|e| e.to_string())?;
        let dist = (r.accuracy - 0.14).abs() + (r.coverage - 0.07).abs();
        if best.as_ref().is_none_or(|(b, _, _)| dist < *b) {
            best = Some((dist, d, r));
        }
    }
    let (_, degree, r) = best.unwrap();
    let misb_ok = (r.accuracy - 0.14).abs() <= 0.10 && (r.coverage - 0.07).abs() <= 0.10;

    // stream table reproduces the per-PC rows
    let w = worked_example_fixture();
    let mut p = PcTemporalLite::new(1, 1024);
    for a in &w.misb_training {
        if let TraceEvent::Access { pc: Some(pc), .. } = a.event {
            p.train_and_predict(pc, block_of(a));
        }
    }
    let row_a: Vec<_> = [1, 2, 3, 3, 4, 5, 6, 7].iter().map(|&i| Array::V.block(i)).collect();
    let pc_a = match w.misb_training[0].event {
        TraceEvent::Access { pc, .. } => pc.unwrap(),
        _ => unreachable!(),
    };
    let streams_ok = p.table().stream(pc_a) == row_a.as_slice();

    // Markov trained on the first iteration's data accesses
    let mut m = Markov::new(1024);
    for a in w.iteration1.iter().filter(|a| !matches!(a.event, TraceEvent::Access { vaddr, .. } if vaddr.0 >= F_BASE)) {
        m.train_and_predict(block_of(a));
    }
    let predicted = m.train_and_predict(Array::V.block(2));
    let demanded: BTreeSet<_> = w.iteration2.iter().map(block_of).collect();
    let useless = predicted == vec![Array::N.block(1)] && !demanded.contains(&Array::N.block(1));
    check(
        misb_ok && streams_ok && useless,
        format!(
            "pc_temporal_lite@{degree}: accuracy {:.3} coverage {:.3}; markov V[2] -> {:?}",
            r.accuracy,
            r.coverage,
            predicted.iter().map(|b| format!("{:#x}", b.value())).collect::<Vec<_>>()
        ),
    )
}

// --- 6: frozen graph --------------------------------------------------------

fn static_replay() -> Outcome {
    let mut w = WorkloadSpec::new(Kernel::Pgd);
    w.active = ActivePolicy::Churn { initial_active: 0.5, churn: 0.0 };
    let spec = ExperimentSpec::new(w, PrefetcherSpec::named("amc").with_next_line(false), 7);
    let run = run_experiment_detailed(&spec, SimOptions { record_sets: true, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let r = &run.result;
    let mut worst = f64::INFINITY;
    let mut notes = vec![];
    // the first iteration runs every vertex, the second records the frozen set
    for k in 2..r.iterations.len() {
        let cands = r.candidate_sets.get(k).cloned().unwrap_or_default();
        let prev = r.miss_sets.get(k - 1).cloned().unwrap_or_default();
        if cands != prev || cands.is_empty() {
            return Err(format!("iteration {k}: {} candidates vs {} prior misses", cands.len(), prev.len()));
        }
        let it = &r.iterations[k];
        let base = run.baseline.iterations[k].non_target_demand_misses;
        let cov = (it.outcomes.useful + it.outcomes.useful_late) as f64 / base.max(1) as f64;
        worst = worst.min(cov);
        notes.push(format!("{cov:.3}"));
    }
    check(worst >= 0.95 && notes.len() >= 2, format!("sets equal, non-target coverage [{}]", notes.join(", ")))
}

// --- 7-10: churning PGD -----------------------------------------------------

struct SeedRows {
    seed: u64,
    amc: ReportRow,
    next_line: ReportRow,
    misb: ReportRow,
}

fn churn_rows() -> Result<Vec<SeedRows>, String> {
    let w = WorkloadSpec::new(Kernel::Pgd);
    let mut specs = vec![];
    for seed in 1..=5 {
        for p in [
            PrefetcherSpec::named("amc"),
            PrefetcherSpec::named("next_line"),
            PrefetcherSpec::named("pc_temporal_lite").with_degree(4),
        ] {
            specs.push(ExperimentSpec::new(w.clone(), p, seed));
        }
    }
    let rows = run_many(&specs).into_iter().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let mut it = rows.into_iter();
    Ok((1..=5)
        .map(|seed| SeedRows { seed, amc: it.next().unwrap(), next_line: it.next().unwrap(), misb: it.next().unwrap() })
        .collect())
}

fn evolving(rows: &[SeedRows]) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for s in rows {
        let (a, n) = (&s.amc, &s.next_line);
        ok &= a.coverage >= 0.4 && a.accuracy >= 0.5 && a.coverage > n.coverage && a.accuracy > n.accuracy;
        parts.push(format!(
            "s{} {:.2}/{:.2} vs {:.2}/{:.2}",
            s.seed, a.coverage, a.accuracy, n.coverage, n.accuracy
        ));
    }
    check(ok, format!("coverage/accuracy amc vs next_line: {}", parts.join("; ")))
}

fn traffic(rows: &[SeedRows]) -> Outcome {
    let ok = rows.iter().all(|s| s.amc.additional_traffic < s.misb.additional_traffic);
    let parts: Vec<_> = rows
        .iter()
        .map(|s| format!("s{} {:.2} < {:.2}", s.seed, s.amc.additional_traffic, s.misb.additional_traffic))
        .collect();
    check(ok, format!("amc vs pc_temporal_lite@4: {}", parts.join("; ")))
}

fn storage(rows: &[SeedRows]) -> Outcome {
    let worst = rows.iter().map(|s| s.amc.storage_overhead_fraction).fold(0.0, f64::max);
    let s = &rows[0].amc;
    check(
        worst <= 0.25,
        format!(
            "worst peak/input {worst:.3} (seed 1: {} of {} bytes)",
            s.peak_metadata_bytes, s.input_bytes
        ),
    )
}

fn miss_sizes() -> Outcome {
    let mut parts = vec![];
    for seed in 1..=5 {
        let spec = ExperimentSpec::new(WorkloadSpec::new(Kernel::Pgd), PrefetcherSpec::named("amc"), seed);
        let sw = sweep_miss_size(&spec, &[5, 10, 20, 40]).map_err(|e| e.to_string())?;
        let fr: Vec<f64> = sw.caps.iter().map(|c| c.fraction).collect();
        if fr.windows(2).any(|p| p[0] > p[1]) {
            return Err(format!("seed {seed}: CDF not monotone {fr:?}"));
        }
        if sw.fraction_at(20) < 0.6 {
            return Err(format!("seed {seed}: {:.3} at cap 20", sw.fraction_at(20)));
        }
        // regression pins from the measured run
        if seed == 1 && (sw.windows, sw.fraction_at(5), sw.fraction_at(20)) != (4833, 4551.0 / 4833.0, 1.0) {
            return Err(format!("seed 1 moved: {} windows, {:?}", sw.windows, fr));
        }
        parts.push(format!("s{seed} {:.3}@5 {:.3}@20", fr[0], fr[2]));
    }
    check(true, parts.join("; "))
}

// --- 11: cache model against a plain LRU ------------------------------------

/// Set-associative LRU with recency lists, most recent first.
struct NaiveLru {
    sets: Vec<VecDeque<u64>>,
    ways: usize,
}

impl NaiveLru {
    fn new(bytes: u64, ways: u32) -> Self {
        let sets = (bytes / 64 / ways as u64) as usize;
        Self { sets: vec![VecDeque::new(); sets], ways: ways as usize }
    }

    fn set(&mut self, b: u64) -> &mut VecDeque<u64> {
        let n = self.sets.len() as u64;
        &mut self.sets[(b % n) as usize]
    }

    fn touch(&mut self, b: u64) -> bool {
        let s = self.set(b);
        match s.iter().position(|&x| x == b) {
            Some(i) => {
                s.remove(i);
                s.push_front(b);
                true
            }
            None => false,
        }
    }

    fn fill(&mut self, b: u64) {
        if self.touch(b) {
            return;
        }
        let ways = self.ways;
        let s = self.set(b);
        if s.len() == ways {
            s.pop_back();
        }
        s.push_front(b);
    }
}

fn cache_oracle() -> Outcome {
    let cfg = HierarchyConfig::default();
    let mut total = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = vec![TraceEvent::Directive(Directive::Init)];
        let mut addrs = vec![];
        for _ in 0..100_000 {
            // a hot region that mostly fits and a cold one that does not
            let line = if rng.gen_bool(0.6) { rng.gen_range(0..6_000u64) } else { rng.gen_range(0..200_000u64) };
            let a = 0x4000_0000 + line * 64 + rng.gen_range(0..64);
            addrs.push(a);
            events.push(TraceEvent::load(a));
        }
        events.push(TraceEvent::Directive(Directive::End));
        let mut h = Hierarchy::new(cfg).map_err(|e| e.to_string())?;
        let r = simulate(&events, &mut h, &mut [], SimOptions { record_miss_log: true, ..Default::default() })
            .map_err(|e| e.to_string())?;

        let (mut l1, mut l2) = (NaiveLru::new(cfg.l1.capacity_bytes, cfg.l1.associativity), NaiveLru::new(cfg.l2.capacity_bytes, cfg.l2.associativity));
        let mut want = vec![];
        for a in addrs {
            let b = Translation::Identity.translate(VirtualAddress(a)).value();
            if l1.touch(b) {
                continue;
            }
            if !l2.touch(b) {
                want.push(blk(b));
                l2.fill(b);
            }
            l1.fill(b);
        }
        if r.miss_log != want {
            let at = r.miss_log.iter().zip(&want).position(|(x, y)| x != y);
            return Err(format!("seed {seed}: {} vs {} misses, first difference at {at:?}", r.miss_log.len(), want.len()));
        }
        total += want.len();
    }
    check(true, format!("10 seeds x 100000 accesses, {total} L2 misses identical"))
}

fn main() {
    let started = Instant::now();
    let rows = churn_rows();
    let rows = &rows;
    let from_rows = |f: fn(&[SeedRows]) -> Outcome| move || rows.as_ref().map_err(Clone::clone).and_then(|r| f(r));
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "compression sizes", Box::new(compression_sizes)),
        (2, "compression round trip", Box::new(round_trips)),
        (3, "worked-example recording", Box::new(binder_recording)),
        (4, "worked-example replay", Box::new(amc_replay)),
        (5, "baseline contrast", Box::new(baseline_contrast)),
        (6, "static-graph replay", Box::new(static_replay)),
        (7, "evolving-graph coverage and accuracy", Box::new(from_rows(evolving))),
        (8, "traffic ordering", Box::new(from_rows(traffic))),
        (9, "storage overhead", Box::new(from_rows(storage))),
        (10, "miss-size distribution", Box::new(miss_sizes)),
        (11, "cache-model oracle", Box::new(cache_oracle)),
    ];
    let mut failed = vec![];
    for (n, name, f) in &criteria {
        let t = Instant::now();
        match f() {
            Ok(d) => println!("criterion {n}: PASS  {name}: {d} [{:.2?}]", t.elapsed()),
            Err(d) => {
                println!("criterion {n}: FAIL  {name}: {d} [{:.2?}]", t.elapsed());
                failed.push(*n);
            }
        }
    }
    println!("{} of {} criteria passed in {:.2?}", criteria.len() - failed.len(), criteria.len(), started.elapsed());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
