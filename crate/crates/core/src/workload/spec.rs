//! Workload selection as it appears in experiment configs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::fixture::worked_example_fixture;
use super::graph::{gen_graph, two_versions, DegreeModel, Graph};
use super::kernels::{bellman_ford_plans, bfs_plans, cc_plans, emit_trace, pgd_plans, ActivePolicy, IterationPlan};
use super::layout::LayoutPlan;
use crate::error::{ConfigError, SimError};
use crate::trace::{self, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Pgd,
    Bfs,
    Cc,
    #[serde(rename = "bellmanford")]
    BellmanFord,
    /// A trace file given by `path`.
    Trace,
    WorkedExample,
}

impl std::str::FromStr for Kernel {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| ConfigError::invalid("workload.kernel", format!("unknown kernel `{s}`")))
    }
}

/// Which training run precedes the worked example's second iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureTraining {
    /// The first-iteration access listing.
    #[default]
    Listing,
    /// The per-PC streams of the PC-localized correlation table.
    PcStreams,
}

fn default_vertices() -> usize {
    1000
}

fn default_avg_degree() -> f64 {
    9.0
}

fn default_iterations() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub kernel: Kernel,
    #[serde(default = "default_vertices")]
    pub vertices: usize,
    #[serde(default = "default_avg_degree")]
    pub avg_degree: f64,
    #[serde(default)]
    pub degree_model: DegreeModel,
    /// Iterations per graph version.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub active: ActivePolicy,
    #[serde(default)]
    pub source: usize,
    /// Graph seed; the experiment seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Input size for trace files, used for the storage ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bytes: Option<u64>,
    #[serde(default)]
    pub training: FixtureTraining,
}

impl WorkloadSpec {
    pub fn new(kernel: Kernel) -> Self {
        Self {
            kernel,
            vertices: default_vertices(),
            avg_degree: default_avg_degree(),
            degree_model: DegreeModel::default(),
            iterations: default_iterations(),
            active: ActivePolicy::default(),
            source: 0,
            graph_seed: None,
            path: None,
            input_bytes: None,
            training: FixtureTraining::default(),
        }
    }

    pub fn worked_example(training: FixtureTraining) -> Self {
        Self { training, ..Self::new(Kernel::WorkedExample) }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::invalid("workload.iterations", "must be > 0"));
        }
        if self.kernel == Kernel::Trace && self.path.is_none() {
            return Err(ConfigError::invalid("workload.path", "required for kernel `trace`"));
        }
        if matches!(self.kernel, Kernel::Bfs | Kernel::BellmanFord) && self.source >= self.vertices {
            return Err(ConfigError::invalid("workload.source", "must be < vertices"));
        }
        self.active.validate()
    }
}

/// A generated trace plus what the metrics need to know about it.
#[derive(Debug, Clone)]
pub struct Workload {
    pub events: Vec<TraceEvent>,
    pub input_bytes: u64,
    /// Per-access miss annotations; present for the worked example, which
    /// runs against a scripted memory.
    pub miss_flags: Option<Vec<bool>>,
    pub layout: Option<LayoutPlan>,
}

/// First vertex at or after `from` (cyclically) with outgoing edges.
fn live_source(g: &Graph, from: usize) -> usize {
    let n = g.vertex_count();
    (0..n).map(|k| (from + k) % n).find(|&v| g.out_degree(v) > 0).unwrap_or(from)
}

pub fn generate(spec: &WorkloadSpec, seed: u64) -> Result<Workload, SimError> {
    spec.validate()?;
    let gseed = spec.graph_seed.unwrap_or(seed);
    let graph = || gen_graph(spec.vertices, spec.avg_degree, spec.degree_model, gseed);
    let two = |plan: &dyn Fn(&Graph) -> Vec<IterationPlan>| -> Result<Workload, SimError> {
        let (a, b) = two_versions(&graph()?, gseed ^ 0x5eed)?;
        let (pa, pb) = (plan(&a), plan(&b));
        let layout = LayoutPlan::packed(a.vertex_count() as u64, a.edge_count().max(b.edge_count()) as u64)?;
        let events = emit_trace(&[(&a, &pa), (&b, &pb)], &layout);
        Ok(Workload { events, input_bytes: layout.input_bytes(), miss_flags: None, layout: Some(layout) })
    };
    match spec.kernel {
        Kernel::Pgd => {
            let g = graph()?;
            let plans = pgd_plans(&g, &spec.active, spec.iterations, seed ^ 0xac71)?;
            let layout = LayoutPlan::packed(g.vertex_count() as u64, g.edge_count() as u64)?;
            let events = emit_trace(&[(&g, &plans)], &layout);
            Ok(Workload { events, input_bytes: layout.input_bytes(), miss_flags: None, layout: Some(layout) })
        }
        Kernel::Cc => {
            let g = graph()?;
            let plans = cc_plans(&g, spec.iterations);
            let layout = LayoutPlan::packed(g.vertex_count() as u64, g.edge_count() as u64)?;
            let events = emit_trace(&[(&g, &plans)], &layout);
            Ok(Workload { events, input_bytes: layout.input_bytes(), miss_flags: None, layout: Some(layout) })
        }
        Kernel::Bfs => two(&|g| bfs_plans(g, live_source(g, spec.source), spec.iterations)),
        Kernel::BellmanFord => two(&|g| bellman_ford_plans(g, live_source(g, spec.source), spec.iterations)),
        Kernel::Trace => {
            let path = spec.path.as_ref().expect("validated");
            let events = trace::read_file(path)?;
            trace::validate(&events)?;
            Ok(Workload { events, input_bytes: spec.input_bytes.unwrap_or(0), miss_flags: None, layout: None })
        }
        Kernel::WorkedExample => {
            let w = worked_example_fixture();
            let (events, flags) = match spec.training {
                FixtureTraining::Listing => w.amc_trace(),
                FixtureTraining::PcStreams => w.misb_trace(),
            };
            Ok(Workload {
                events,
                input_bytes: w.layout.input_bytes(),
                miss_flags: Some(flags),
                layout: Some(w.layout),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::Region;

    #[test]
    fn every_kernel_generates_a_valid_trace() {
        for k in [Kernel::Pgd, Kernel::Bfs, Kernel::Cc, Kernel::BellmanFord, Kernel::WorkedExample] {
            let spec = WorkloadSpec { vertices: 200, iterations: 4, ..WorkloadSpec::new(k) };
            let w = generate(&spec, 3).unwrap();
            trace::validate(&w.events).unwrap();
            assert!(w.events.iter().any(|e| e.is_access()), "{k:?}");
            let layout = w.layout.unwrap();
            for e in &w.events {
                if let TraceEvent::Access { vaddr, .. } = e {
                    assert!(layout.regions().iter().any(|r| r.contains(*vaddr)));
                    let _: Region = layout.classify(*vaddr);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let spec = WorkloadSpec { vertices: 300, ..WorkloadSpec::new(Kernel::Pgd) };
        assert_eq!(generate(&spec, 9).unwrap().events, generate(&spec, 9).unwrap().events);
        assert_ne!(generate(&spec, 9).unwrap().events, generate(&spec, 10).unwrap().events);
    }

    #[test]
    fn parses_with_defaults_and_rejects_unknown_fields() {
        let s: WorkloadSpec = serde_json::from_str(r#"{"kernel":"bellmanford"}"#).unwrap();
        assert_eq!((s.kernel, s.vertices, s.iterations), (Kernel::BellmanFord, 1000, 10));
        assert!(serde_json::from_str::<WorkloadSpec>(r#"{"kernel":"pgd","vertexes":5}"#).is_err());
        assert_eq!("cc".parse::<Kernel>().unwrap(), Kernel::Cc);
        assert_eq!("nope".parse::<Kernel>().unwrap_err().field, "workload.kernel");
    }

    #[test]
    fn trace_kernel_needs_a_path() {
        assert_eq!(WorkloadSpec::new(Kernel::Trace).validate().unwrap_err().field, "workload.path");
    }
}
