//! Experiment configs and the runner that turns them into report rows.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::amc::{Amc, AmcConfig};
use crate::baselines::{IpStride, Markov, NextLine, PcTemporalLite};
use crate::cache::{Hierarchy, HierarchyConfig, ScriptedMemory};
use crate::error::{ConfigError, SimError};
use crate::prefetch::{AmcPrefetcher, Prefetcher};
use crate::report::{ComparisonReport, DeltaRow, ReportRow, SweepReport};
use crate::sim::{simulate, SimOptions, SimResult};
use crate::translate::Translation;
use crate::workload::{generate, Kernel, Workload, WorkloadSpec};

pub const PREFETCHER_NAMES: [&str; 6] = ["none", "next_line", "ip_stride", "markov", "pc_temporal_lite", "amc"];

fn default_markov_capacity() -> usize {
    16 * 1024
}

fn default_stream_capacity() -> usize {
    1 << 20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefetcherSpec {
    /// One of [`PREFETCHER_NAMES`], or several joined by commas.
    pub name: String,
    /// Degree for ip_stride (default 4) and pc_temporal_lite (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Run next_line alongside. Defaults to on, except for the worked
    /// example and for "none".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_next_line: Option<bool>,
    #[serde(default)]
    pub amc: AmcConfig,
    #[serde(default = "default_markov_capacity")]
    pub markov_capacity: usize,
    #[serde(default = "default_stream_capacity")]
    pub stream_capacity: usize,
}

impl PrefetcherSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            degree: None,
            baseline_next_line: None,
            amc: AmcConfig::default(),
            markov_capacity: default_markov_capacity(),
            stream_capacity: default_stream_capacity(),
        }
    }

    pub fn with_degree(mut self, d: usize) -> Self {
        self.degree = Some(d);
        self
    }

    pub fn with_next_line(mut self, on: bool) -> Self {
        self.baseline_next_line = Some(on);
        self
    }

    fn parts(&self) -> Vec<&str> {
        self.name.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let parts = self.parts();
        if parts.is_empty() {
            return Err(ConfigError::invalid("prefetcher.name", "empty"));
        }
        for p in &parts {
            if !PREFETCHER_NAMES.contains(p) {
                return Err(ConfigError::invalid("prefetcher.name", format!("unknown prefetcher `{p}`")));
            }
        }
        if parts.len() > 1 && parts.contains(&"none") {
            return Err(ConfigError::invalid("prefetcher.name", "`none` cannot be combined"));
        }
        if self.degree == Some(0) {
            return Err(ConfigError::invalid("prefetcher.degree", "must be > 0"));
        }
        if self.markov_capacity == 0 {
            return Err(ConfigError::invalid("prefetcher.markov_capacity", "must be > 0"));
        }
        if self.stream_capacity == 0 {
            return Err(ConfigError::invalid("prefetcher.stream_capacity", "must be > 0"));
        }
        if parts.contains(&"amc") {
            self.amc.validate()?;
        }
        Ok(())
    }

    /// The label used in reports, including the implied next_line.
    pub fn label(&self, workload: &WorkloadSpec) -> String {
        let mut parts: Vec<String> = self.parts().iter().map(|s| s.to_string()).collect();
        if let Some(d) = self.degree {
            for p in parts.iter_mut().filter(|p| *p == "ip_stride" || *p == "pc_temporal_lite") {
                *p = format!("{p}@{d}");
            }
        }
        if self.adds_next_line(workload) {
            parts.push("next_line".to_string());
        }
        parts.join("+")
    }

    fn adds_next_line(&self, workload: &WorkloadSpec) -> bool {
        let parts = self.parts();
        let default = workload.kernel != Kernel::WorkedExample;
        parts != ["none"] && !parts.contains(&"next_line") && self.baseline_next_line.unwrap_or(default)
    }

    /// Instantiates the prefetchers, in issue order.
    pub fn build(&self, workload: &WorkloadSpec) -> Result<Vec<Box<dyn Prefetcher>>, ConfigError> {
        self.validate()?;
        let mut out: Vec<Box<dyn Prefetcher>> = Vec::new();
        for p in self.parts() {
            match p {
                "none" => {}
                "next_line" => out.push(Box::new(NextLine)),
                "ip_stride" => out.push(Box::new(IpStride::new(self.degree.unwrap_or(4), 2, 256))),
                "markov" => out.push(Box::new(Markov::new(self.markov_capacity))),
                "pc_temporal_lite" => {
                    out.push(Box::new(PcTemporalLite::new(self.degree.unwrap_or(1), self.stream_capacity)))
                }
                "amc" => out.push(Box::new(AmcPrefetcher::new(Amc::new(self.amc.clone())?))),
                _ => unreachable!("validated"),
            }
        }
        if self.adds_next_line(workload) {
            out.push(Box::new(NextLine));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// Bounds checked by `--assert`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    pub min_coverage: Option<f64>,
    pub max_coverage: Option<f64>,
    pub min_accuracy: Option<f64>,
    pub max_accuracy: Option<f64>,
    pub max_storage_overhead: Option<f64>,
    pub max_additional_traffic: Option<f64>,
    /// Least fraction of windows with at most 20 misses, for sweeps.
    pub min_fraction_at_20: Option<f64>,
}

impl Assertions {
    /// Descriptions of every violated bound.
    pub fn check_row(&self, r: &ReportRow) -> Vec<String> {
        let mut bad = Vec::new();
        let mut lo = |name: &str, v: f64, b: Option<f64>| {
            if let Some(b) = b.filter(|&b| v < b) {
                bad.push(format!("{name} {v} < {b}"));
            }
        };
        lo("coverage", r.coverage, self.min_coverage);
        lo("accuracy", r.accuracy, self.min_accuracy);
        let mut hi = |name: &str, v: f64, b: Option<f64>| {
            if let Some(b) = b.filter(|&b| v > b) {
                bad.push(format!("{name} {v} > {b}"));
            }
        };
        hi("coverage", r.coverage, self.max_coverage);
        hi("accuracy", r.accuracy, self.max_accuracy);
        hi("storage_overhead_fraction", r.storage_overhead_fraction, self.max_storage_overhead);
        hi("additional_traffic", r.additional_traffic, self.max_additional_traffic);
        bad
    }

    pub fn check_sweep(&self, s: &SweepReport) -> Vec<String> {
        match self.min_fraction_at_20 {
            Some(b) if s.fraction_at(20) < b => vec![format!("fraction at cap 20 {} < {b}", s.fraction_at(20))],
            _ => Vec::new(),
        }
    }
}

fn desk_cache() -> HierarchyConfig {
    HierarchyConfig::desk_scale()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub workload: WorkloadSpec,
    #[serde(default = "desk_cache")]
    pub cache: HierarchyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefetcher: Option<PrefetcherSpec>,
    /// Several prefetchers over one workload, for `compare`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefetchers: Vec<PrefetcherSpec>,
    #[serde(default)]
    pub translation: Translation,
    #[serde(default)]
    pub seed: u64,
    /// Iterations before this one are warmup and excluded from the totals.
    /// Defaults to 1 for the worked example and 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_from_iteration: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, rename = "assert")]
    pub assertions: Assertions,
}

impl ExperimentSpec {
    pub fn new(workload: WorkloadSpec, prefetcher: PrefetcherSpec, seed: u64) -> Self {
        Self {
            workload,
            cache: desk_cache(),
            prefetcher: Some(prefetcher),
            prefetchers: Vec::new(),
            translation: Translation::Identity,
            seed,
            measure_from_iteration: None,
            output: OutputSpec::default(),
            assertions: Assertions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("config");
            ConfigError::invalid(field, msg.clone())
        })?;
        Ok(spec)
    }

    pub fn measure_from(&self) -> usize {
        self.measure_from_iteration.unwrap_or(if self.workload.kernel == Kernel::WorkedExample { 1 } else { 0 })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workload.validate()?;
        self.cache.validate()?;
        match (&self.prefetcher, self.prefetchers.is_empty()) {
            (Some(p), true) => p.validate(),
            (None, false) => self.prefetchers.iter().try_for_each(PrefetcherSpec::validate),
            (Some(_), false) => Err(ConfigError::invalid("prefetchers", "give `prefetcher` or `prefetchers`, not both")),
            (None, true) => Err(ConfigError::invalid("prefetcher", "missing")),
        }
    }

    /// One spec per listed prefetcher.
    pub fn expand(&self) -> Vec<ExperimentSpec> {
        match &self.prefetcher {
            Some(_) => vec![self.clone()],
            None => self
                .prefetchers
                .iter()
                .map(|p| Self { prefetcher: Some(p.clone()), prefetchers: Vec::new(), ..self.clone() })
                .collect(),
        }
    }

    fn single(&self) -> Result<&PrefetcherSpec, ConfigError> {
        self.validate()?;
        match &self.prefetcher {
            Some(p) => Ok(p),
            None => Err(ConfigError::invalid("prefetchers", "expected a single prefetcher")),
        }
    }
}

/// Runs one pass of `workload` with `prefetchers`.
pub fn run_pass(
    spec: &ExperimentSpec,
    workload: &Workload,
    prefetchers: &mut [Box<dyn Prefetcher>],
    opts: SimOptions,
) -> Result<SimResult, SimError> {
    let opts = SimOptions { translation: spec.translation, ..opts };
    match &workload.miss_flags {
        Some(flags) => simulate(&workload.events, &mut ScriptedMemory::new(flags.clone()), prefetchers, opts),
        None => simulate(&workload.events, &mut Hierarchy::new(spec.cache)?, prefetchers, opts),
    }
}

/// The three passes behind a report row.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub row: ReportRow,
    pub baseline: SimResult,
    pub next_line: SimResult,
    pub result: SimResult,
}

/// Baseline pass without prefetching, a next-line-only pass, then the
/// configured prefetchers, all on the same trace.
pub fn run_experiment_detailed(spec: &ExperimentSpec, opts: SimOptions) -> Result<ExperimentRun, SimError> {
    let p = spec.single()?;
    let workload = generate(&spec.workload, spec.seed)?;
    let baseline = run_pass(spec, &workload, &mut [], opts)?;
    let mut nl: Vec<Box<dyn Prefetcher>> = vec![Box::new(NextLine)];
    let next_line = run_pass(spec, &workload, &mut nl, opts)?;
    let mut pfs = p.build(&spec.workload)?;
    let result = run_pass(spec, &workload, &mut pfs, opts)?;
    let row = ReportRow::build(
        serde_json::to_value(spec.workload.kernel).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        p.label(&spec.workload),
        spec.seed,
        spec.measure_from(),
        workload.input_bytes,
        &baseline,
        &next_line,
        &result,
    );
    Ok(ExperimentRun { row, baseline, next_line, result })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ReportRow, SimError> {
    Ok(run_experiment_detailed(spec, SimOptions::default())?.row)
}

/// Runs independent specs on separate threads; results keep input order.
pub fn run_many(specs: &[ExperimentSpec]) -> Vec<Result<ReportRow, SimError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = specs.iter().map(|spec| s.spawn(move || run_experiment(spec))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    })
}

/// Window-size distribution of AMC recording, with the fraction of windows
/// that fit each cap.
pub fn sweep_miss_size(spec: &ExperimentSpec, caps: &[usize]) -> Result<SweepReport, SimError> {
    let p = spec.single()?;
    if !p.parts().contains(&"amc") {
        return Err(ConfigError::invalid("prefetcher.name", "sweep requires amc").into());
    }
    let workload = generate(&spec.workload, spec.seed)?;
    let mut pfs = p.build(&spec.workload)?;
    let res = run_pass(spec, &workload, &mut pfs, SimOptions::default())?;
    let hist = res
        .sources
        .iter()
        .find_map(|s| s.report.amc.as_ref())
        .map(|a| a.window_histogram.clone())
        .unwrap_or_default();
    Ok(SweepReport::new(hist, caps))
}

/// One row per spec plus deltas against the first. All specs must share
/// the workload and seed.
pub fn compare(specs: &[ExperimentSpec]) -> Result<ComparisonReport, SimError> {
    let specs: Vec<ExperimentSpec> = specs.iter().flat_map(ExperimentSpec::expand).collect();
    if specs.len() < 2 {
        return Err(ConfigError::invalid("prefetchers", "compare needs at least two prefetchers").into());
    }
    for s in &specs[1..] {
        if s.workload != specs[0].workload || s.seed != specs[0].seed {
            return Err(ConfigError::invalid("workload", "compared experiments must share workload and seed").into());
        }
    }
    let rows = run_many(&specs).into_iter().collect::<Result<Vec<_>, _>>()?;
    let deltas = rows.iter().map(|r| DeltaRow::between(&rows[0], r)).collect();
    Ok(ComparisonReport { rows, deltas })
}
