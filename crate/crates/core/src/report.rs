//! Report rows and their CSV and JSON renderings.
//!
//! Ratios:
//! - coverage = (useful + useful_late) / demand_misses_baseline, capped at 1
//! - accuracy = (useful + useful_late) / prefetches_issued
//! - additional_traffic = (prefetch_dram_accesses - demand_dram_accesses) / demand_dram_accesses
//! - storage_overhead_fraction = peak_metadata_bytes / input_bytes
//!
//! `demand_dram_accesses` is the baseline run's DRAM reads and
//! `prefetch_dram_accesses` all DRAM transfers of the prefetching run:
//! demand reads, prefetch fills and metadata lines. A ratio with a zero
//! denominator is reported as 0.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::sim::SimResult;

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn coverage(useful: u64, baseline_misses: u64) -> f64 {
    ratio(useful, baseline_misses).min(1.0)
}

pub fn accuracy(useful: u64, issued: u64) -> f64 {
    ratio(useful, issued)
}

pub fn additional_traffic(prefetch_dram: u64, demand_dram: u64) -> f64 {
    if demand_dram == 0 {
        0.0
    } else {
        (prefetch_dram as f64 - demand_dram as f64) / demand_dram as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub demand_misses_baseline: u64,
    pub demand_misses_with_prefetch: u64,
    pub prefetches_issued: u64,
    pub useful: u64,
    pub useful_late: u64,
    pub evicted_unused: u64,
    pub never_used: u64,
    pub coverage: f64,
    pub accuracy: f64,
}

impl IterationRow {
    pub const COLUMNS: [&'static str; 10] = [
        "iteration",
        "demand_misses_baseline",
        "demand_misses_with_prefetch",
        "prefetches_issued",
        "useful",
        "useful_late",
        "evicted_unused",
        "never_used",
        "coverage",
        "accuracy",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.iteration.to_string(),
            self.demand_misses_baseline.to_string(),
            self.demand_misses_with_prefetch.to_string(),
            self.prefetches_issued.to_string(),
            self.useful.to_string(),
            self.useful_late.to_string(),
            self.evicted_unused.to_string(),
            self.never_used.to_string(),
            self.coverage.to_string(),
            self.accuracy.to_string(),
        ]
    }
}

/// One experiment's metrics. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub workload: String,
    pub prefetcher: String,
    pub seed: u64,
    pub measure_from_iteration: usize,
    pub demand_misses_baseline: u64,
    pub demand_misses_next_line: u64,
    pub demand_misses_with_prefetch: u64,
    pub prefetches_issued: u64,
    pub useful: u64,
    pub useful_late: u64,
    pub evicted_unused: u64,
    pub never_used: u64,
    pub coverage: f64,
    pub accuracy: f64,
    pub demand_dram_accesses: u64,
    pub prefetch_dram_accesses: u64,
    pub prefetch_fill_dram_accesses: u64,
    pub metadata_dram_accesses: u64,
    pub additional_traffic: f64,
    pub metadata_bytes_read: u64,
    pub metadata_bytes_written: u64,
    pub peak_metadata_bytes: u64,
    pub input_bytes: u64,
    pub storage_overhead_fraction: f64,
    pub iterations: Vec<IterationRow>,
}

impl ReportRow {
    pub const COLUMNS: [&'static str; 24] = [
        "workload",
        "prefetcher",
        "seed",
        "measure_from_iteration",
        "demand_misses_baseline",
        "demand_misses_next_line",
        "demand_misses_with_prefetch",
        "prefetches_issued",
        "useful",
        "useful_late",
        "evicted_unused",
        "never_used",
        "coverage",
        "accuracy",
        "demand_dram_accesses",
        "prefetch_dram_accesses",
        "prefetch_fill_dram_accesses",
        "metadata_dram_accesses",
        "additional_traffic",
        "metadata_bytes_read",
        "metadata_bytes_written",
        "peak_metadata_bytes",
        "input_bytes",
        "storage_overhead_fraction",
    ];

    #[allow(clippy::too_many_arguments)]
    pub fn build(
        workload: String,
        prefetcher: String,
        seed: u64,
        from: usize,
        input_bytes: u64,
        baseline: &SimResult,
        next_line: &SimResult,
        run: &SimResult,
    ) -> Self {
        let b = baseline.totals_from(from);
        let t = run.totals_from(from);
        let useful = t.outcomes.useful + t.outcomes.useful_late;
        let metadata_dram = run.metadata_lines();
        let prefetch_dram = t.demand_dram + t.prefetches_issued + metadata_dram;
        let (read, written) = run.metadata_bytes();
        let peak = run.peak_metadata_bytes();
        let n = baseline.iterations.len().max(run.iterations.len());
        let iterations = (from..n)
            .map(|i| {
                let bi = baseline.iterations.get(i).cloned().unwrap_or_default();
                let ri = run.iterations.get(i).cloned().unwrap_or_default();
                let u = ri.outcomes.useful + ri.outcomes.useful_late;
                IterationRow {
                    iteration: i,
                    demand_misses_baseline: bi.demand_misses,
                    demand_misses_with_prefetch: ri.demand_misses,
                    prefetches_issued: ri.prefetches_issued,
                    useful: ri.outcomes.useful,
                    useful_late: ri.outcomes.useful_late,
                    evicted_unused: ri.outcomes.evicted_unused,
                    never_used: ri.outcomes.never_used,
                    coverage: coverage(u, bi.demand_misses),
                    accuracy: accuracy(u, ri.prefetches_issued),
                }
            })
            .collect();
        Self {
            workload,
            prefetcher,
            seed,
            measure_from_iteration: from,
            demand_misses_baseline: b.demand_misses,
            demand_misses_next_line: next_line.totals_from(from).demand_misses,
            demand_misses_with_prefetch: t.demand_misses,
            prefetches_issued: t.prefetches_issued,
            useful: t.outcomes.useful,
            useful_late: t.outcomes.useful_late,
            evicted_unused: t.outcomes.evicted_unused,
            never_used: t.outcomes.never_used,
            coverage: coverage(useful, b.demand_misses),
            accuracy: accuracy(useful, t.prefetches_issued),
            demand_dram_accesses: b.demand_dram,
            prefetch_dram_accesses: prefetch_dram,
            prefetch_fill_dram_accesses: t.prefetches_issued,
            metadata_dram_accesses: metadata_dram,
            additional_traffic: additional_traffic(prefetch_dram, b.demand_dram),
            metadata_bytes_read: read,
            metadata_bytes_written: written,
            peak_metadata_bytes: peak,
            input_bytes,
            storage_overhead_fraction: ratio(peak, input_bytes),
            iterations,
        }
    }

    /// Ratios recomputed from the raw counters.
    pub fn recomputed(&self) -> [f64; 4] {
        let u = self.useful + self.useful_late;
        [
            coverage(u, self.demand_misses_baseline),
            accuracy(u, self.prefetches_issued),
            additional_traffic(self.prefetch_dram_accesses, self.demand_dram_accesses),
            ratio(self.peak_metadata_bytes, self.input_bytes),
        ]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.workload.clone(),
            self.prefetcher.clone(),
            self.seed.to_string(),
            self.measure_from_iteration.to_string(),
            self.demand_misses_baseline.to_string(),
            self.demand_misses_next_line.to_string(),
            self.demand_misses_with_prefetch.to_string(),
            self.prefetches_issued.to_string(),
            self.useful.to_string(),
            self.useful_late.to_string(),
            self.evicted_unused.to_string(),
            self.never_used.to_string(),
            self.coverage.to_string(),
            self.accuracy.to_string(),
            self.demand_dram_accesses.to_string(),
            self.prefetch_dram_accesses.to_string(),
            self.prefetch_fill_dram_accesses.to_string(),
            self.metadata_dram_accesses.to_string(),
            self.additional_traffic.to_string(),
            self.metadata_bytes_read.to_string(),
            self.metadata_bytes_written.to_string(),
            self.peak_metadata_bytes.to_string(),
            self.input_bytes.to_string(),
            self.storage_overhead_fraction.to_string(),
        ]
    }
}

fn write_table<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_rows_csv<W: Write>(w: W, rows: &[ReportRow]) -> csv::Result<()> {
    write_table(w, &ReportRow::COLUMNS, rows.iter().map(ReportRow::record))
}

/// Per-iteration breakdowns, prefixed by the row's prefetcher.
pub fn write_iterations_csv<W: Write>(w: W, rows: &[ReportRow]) -> csv::Result<()> {
    let mut header = vec!["prefetcher"];
    header.extend(IterationRow::COLUMNS);
    let recs = rows.iter().flat_map(|r| {
        r.iterations.iter().map(move |it| {
            let mut rec = vec![r.prefetcher.clone()];
            rec.extend(it.record());
            rec
        })
    });
    write_table(w, &header, recs)
}

pub fn write_rows_json<W: Write>(w: W, rows: &[ReportRow]) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, rows)
}

/// Differences of a row against a reference row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub prefetcher: String,
    pub coverage: f64,
    pub accuracy: f64,
    pub additional_traffic: f64,
    pub storage_overhead_fraction: f64,
}

impl DeltaRow {
    pub const COLUMNS: [&'static str; 5] =
        ["prefetcher", "coverage_delta", "accuracy_delta", "additional_traffic_delta", "storage_overhead_delta"];

    pub fn between(reference: &ReportRow, r: &ReportRow) -> Self {
        Self {
            prefetcher: r.prefetcher.clone(),
            coverage: r.coverage - reference.coverage,
            accuracy: r.accuracy - reference.accuracy,
            additional_traffic: r.additional_traffic - reference.additional_traffic,
            storage_overhead_fraction: r.storage_overhead_fraction - reference.storage_overhead_fraction,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.prefetcher.clone(),
            self.coverage.to_string(),
            self.accuracy.to_string(),
            self.additional_traffic.to_string(),
            self.storage_overhead_fraction.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub deltas: Vec<DeltaRow>,
}

impl ComparisonReport {
    pub fn write_deltas_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_table(w, &DeltaRow::COLUMNS, self.deltas.iter().map(DeltaRow::record))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapFraction {
    pub cap: usize,
    pub fraction: f64,
}

/// Distribution of per-window miss counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub windows: u64,
    pub histogram: BTreeMap<u64, u64>,
    pub caps: Vec<CapFraction>,
}

impl SweepReport {
    pub fn new(histogram: BTreeMap<u64, u64>, caps: &[usize]) -> Self {
        let windows = histogram.values().sum();
        let mut s = Self { windows, histogram, caps: Vec::new() };
        let mut caps = caps.to_vec();
        caps.sort_unstable();
        caps.dedup();
        s.caps = caps.into_iter().map(|cap| CapFraction { cap, fraction: s.fraction_at(cap) }).collect();
        s
    }

    /// Fraction of windows with at most `cap` misses.
    pub fn fraction_at(&self, cap: usize) -> f64 {
        let within: u64 = self.histogram.range(..=cap as u64).map(|(_, n)| n).sum();
        ratio(within, self.windows)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_table(
            w,
            &["cap", "fraction"],
            self.caps.iter().map(|c| vec![c.cap.to_string(), c.fraction.to_string()]),
        )
    }

    pub fn write_histogram_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        write_table(w, &["misses", "windows"], self.histogram.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]))
    }
}
