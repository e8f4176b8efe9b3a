//! Synthetic evolving-graph workloads and the worked example.

pub mod fixture;
pub mod graph;
pub mod kernels;
pub mod layout;
pub mod pgd;
pub mod spec;

pub use fixture::{worked_example_fixture, FixtureAccess, WorkedExample};
pub use graph::{gen_graph, mutate, mutate_with_log, two_versions, DegreeModel, Graph, Mutation, MutationSchedule};
pub use kernels::{
    bellman_ford_plans, bfs_plans, cc_plans, churn_active_sets, emit_iteration, emit_trace, pgd_plans, ActivePolicy,
    IterationPlan, Stores,
};
pub use layout::LayoutPlan;
pub use pgd::{pgd_reference, PgdParams, PgdRun};
pub use spec::{generate, FixtureTraining, Kernel, Workload, WorkloadSpec};
