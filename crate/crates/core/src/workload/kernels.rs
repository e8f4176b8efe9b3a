//! Graph kernels as per-iteration plans, and the trace emitter they share.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::layout::{pc, LayoutPlan};
use super::pgd::{pgd_reference, PgdParams};
use crate::error::ConfigError;
use crate::trace::{Directive, TraceEvent};

/// Which property writes an iteration performs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stores {
    /// Every edge of an active vertex writes its destination's property.
    AllEdges,
    /// Per flat-edge-index flags.
    PerEdge(Vec<bool>),
}

impl Stores {
    fn get(&self, edge: usize) -> bool {
        match self {
            Stores::AllEdges => true,
            Stores::PerEdge(v) => v[edge],
        }
    }
}

/// What one iteration touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationPlan {
    pub active: Vec<bool>,
    pub stores: Stores,
}

impl IterationPlan {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// How PGD active sets are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ActivePolicy {
    /// Derived from a reference PageRank-Delta run.
    Reference(PgdParams<f64>),
    /// All vertices in the first iteration, then a random `initial_active`
    /// fraction; each later iteration swaps a `churn` fraction of the
    /// active set for inactive vertices.
    Churn { initial_active: f64, churn: f64 },
}

impl Default for ActivePolicy {
    fn default() -> Self {
        Self::Churn { initial_active: 0.5, churn: 0.15 }
    }
}

impl ActivePolicy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            Self::Reference(p) => p.validate(),
            Self::Churn { initial_active, churn } => {
                if !(0.0..=1.0).contains(initial_active) {
                    return Err(ConfigError::invalid("workload.active.initial_active", "must be in [0, 1]"));
                }
                if !(0.0..=1.0).contains(churn) {
                    return Err(ConfigError::invalid("workload.active.churn", "must be in [0, 1]"));
                }
                Ok(())
            }
        }
    }
}

/// Active sets under a churn policy.
pub fn churn_active_sets(n: usize, iterations: usize, initial_active: f64, churn: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(iterations);
    if iterations == 0 {
        return sets;
    }
    sets.push(vec![true; n]);
    let k = (n as f64 * initial_active).round() as usize;
    let mut active = vec![false; n];
    for v in sample(&mut rng, n, k) {
        active[v] = true;
    }
    for _ in 1..iterations {
        sets.push(active.clone());
        let on: Vec<usize> = (0..n).filter(|&v| active[v]).collect();
        let off: Vec<usize> = (0..n).filter(|&v| !active[v]).collect();
        let swap = ((on.len() as f64 * churn).round() as usize).min(off.len());
        for &v in on.choose_multiple(&mut rng, swap) {
            active[v] = false;
        }
        for &v in off.choose_multiple(&mut rng, swap) {
            active[v] = true;
        }
    }
    sets
}

pub fn pgd_plans(g: &Graph, policy: &ActivePolicy, iterations: usize, seed: u64) -> Result<Vec<IterationPlan>, ConfigError> {
    policy.validate()?;
    let sets = match policy {
        ActivePolicy::Reference(p) => pgd_reference(g, &PgdParams { max_iterations: iterations, ..*p })?.active_sets,
        ActivePolicy::Churn { initial_active, churn } => {
            churn_active_sets(g.vertex_count(), iterations, *initial_active, *churn, seed)
        }
    };
    Ok(sets.into_iter().map(|active| IterationPlan { active, stores: Stores::AllEdges }).collect())
}

/// Level-synchronous BFS from `source`: each level is an iteration and a
/// property store marks the first discovery of a vertex.
pub fn bfs_plans(g: &Graph, source: usize, max_iterations: usize) -> Vec<IterationPlan> {
    let n = g.vertex_count();
    let mut visited = vec![false; n];
    let mut frontier = vec![false; n];
    visited[source] = true;
    frontier[source] = true;
    let mut plans = Vec::new();
    while frontier.iter().any(|&f| f) && plans.len() < max_iterations {
        let mut stores = vec![false; g.edge_count()];
        let mut next = vec![false; n];
        for v in (0..n).filter(|&v| frontier[v]) {
            for e in g.edge_range(v) {
                let u = g.neighbor_array()[e] as usize;
                if !visited[u] {
                    visited[u] = true;
                    next[u] = true;
                    stores[e] = true;
                }
            }
        }
        plans.push(IterationPlan { active: std::mem::replace(&mut frontier, next), stores: Stores::PerEdge(stores) });
    }
    plans
}

/// Label propagation connected components (min label, pushed along edges).
pub fn cc_plans(g: &Graph, max_iterations: usize) -> Vec<IterationPlan> {
    let n = g.vertex_count();
    let mut label: Vec<u64> = (0..n as u64).collect();
    let mut active = vec![true; n];
    let mut plans = Vec::new();
    while active.iter().any(|&a| a) && plans.len() < max_iterations {
        let mut stores = vec![false; g.edge_count()];
        let mut next = vec![false; n];
        for v in (0..n).filter(|&v| active[v]) {
            for e in g.edge_range(v) {
                let u = g.neighbor_array()[e] as usize;
                if label[v] < label[u] {
                    label[u] = label[v];
                    next[u] = true;
                    stores[e] = true;
                }
            }
        }
        plans.push(IterationPlan { active: std::mem::replace(&mut active, next), stores: Stores::PerEdge(stores) });
    }
    plans
}

/// Deterministic edge weight in 1..=16.
pub fn edge_weight(src: u64, dst: u64) -> u64 {
    let mut x = src.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ dst.rotate_left(29);
    x ^= x >> 31;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    1 + x % 16
}

/// Frontier-based Bellman-Ford from `source`.
pub fn bellman_ford_plans(g: &Graph, source: usize, max_iterations: usize) -> Vec<IterationPlan> {
    let n = g.vertex_count();
    let mut dist = vec![u64::MAX; n];
    dist[source] = 0;
    let mut active = vec![false; n];
    active[source] = true;
    let mut plans = Vec::new();
    while active.iter().any(|&a| a) && plans.len() < max_iterations {
        let mut stores = vec![false; g.edge_count()];
        let mut next = vec![false; n];
        for v in (0..n).filter(|&v| active[v]) {
            for e in g.edge_range(v) {
                let u = g.neighbor_array()[e] as usize;
                let d = dist[v] + edge_weight(v as u64, u as u64);
                if d < dist[u] {
                    dist[u] = d;
                    next[u] = true;
                    stores[e] = true;
                }
            }
        }
        plans.push(IterationPlan { active: std::mem::replace(&mut active, next), stores: Stores::PerEdge(stores) });
    }
    plans
}

/// Header directives that register the target and frontier arrays.
pub fn prologue(layout: &LayoutPlan) -> Vec<TraceEvent> {
    vec![
        TraceEvent::Directive(Directive::Init),
        TraceEvent::Directive(Directive::AddrTBase(layout.target())),
        TraceEvent::Directive(Directive::AddrFBase(layout.frontier())),
    ]
}

/// Appends one iteration: for each vertex a frontier load; for active
/// vertices the target load, then per edge the neighbor load and the
/// destination property load (and store). Closes with Update.
pub fn emit_iteration(out: &mut Vec<TraceEvent>, g: &Graph, plan: &IterationPlan, layout: &LayoutPlan) {
    for v in 0..g.vertex_count() {
        out.push(TraceEvent::load(layout.f.element(v as u64).0).with_pc(pc::FRONTIER));
        if !plan.active[v] {
            continue;
        }
        out.push(TraceEvent::load(layout.v.element(v as u64).0).with_pc(pc::TARGET));
        for e in g.edge_range(v) {
            let u = g.neighbor_array()[e];
            out.push(TraceEvent::load(layout.n.element(e as u64).0).with_pc(pc::NEIGHBOR));
            let p = layout.p.element(u).0;
            out.push(TraceEvent::load(p).with_pc(pc::PROPERTY_LOAD));
            if plan.stores.get(e) {
                out.push(TraceEvent::store(p).with_pc(pc::PROPERTY_STORE));
            }
        }
    }
    out.push(TraceEvent::Directive(Directive::Update));
}

/// A complete trace over one or more graph versions run back to back.
pub fn emit_trace(runs: &[(&Graph, &[IterationPlan])], layout: &LayoutPlan) -> Vec<TraceEvent> {
    let mut out = prologue(layout);
    for (g, plans) in runs {
        for plan in plans.iter() {
            emit_iteration(&mut out, g, plan, layout);
        }
    }
    out.push(TraceEvent::Directive(Directive::End));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::Region;
    use crate::trace::validate;
    use crate::workload::graph::{gen_graph, DegreeModel};

    #[test]
    fn churn_keeps_active_size_and_swaps_fraction() {
        let sets = churn_active_sets(1000, 5, 0.5, 0.2, 1);
        assert!(sets[0].iter().all(|&a| a));
        for w in sets[1..].windows(2) {
            let a = w[0].iter().filter(|&&x| x).count();
            let b = w[1].iter().filter(|&&x| x).count();
            assert_eq!(a, 500);
            assert_eq!(b, 500);
            let kept = w[0].iter().zip(&w[1]).filter(|(x, y)| **x && **y).count();
            assert_eq!(kept, 400);
        }
    }

    #[test]
    fn zero_churn_freezes_the_set() {
        let sets = churn_active_sets(100, 6, 0.3, 0.0, 4);
        assert!(sets[1..].windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn bfs_visits_reachable_once() {
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 0)]).unwrap();
        let plans = bfs_plans(&g, 0, 10);
        assert_eq!(plans.len(), 3);
        assert_eq!(plans[1].active, vec![false, true, true, false, false]);
        let stores: usize = plans.iter().map(|p| match &p.stores {
            Stores::PerEdge(v) => v.iter().filter(|&&s| s).count(),
            Stores::AllEdges => unreachable!(),
        }).sum();
        assert_eq!(stores, 3);
    }

    #[test]
    fn cc_converges_to_min_labels() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        let plans = cc_plans(&g, 10);
        assert!(plans.len() >= 2);
        assert!(plans.last().unwrap().active_count() <= 2);
    }

    #[test]
    fn every_access_lands_in_a_layout_region() {
        let g = gen_graph(200, 4.0, DegreeModel::PowerLaw, 2).unwrap();
        let layout = LayoutPlan::packed(200, g.edge_count() as u64).unwrap();
        let plans = pgd_plans(&g, &ActivePolicy::default(), 5, 3).unwrap();
        let t = emit_trace(&[(&g, &plans)], &layout);
        validate(&t).unwrap();
        let mut per_iter = 0;
        for e in &t {
            match e {
                TraceEvent::Access { vaddr, .. } => {
                    per_iter += 1;
                    let inside = layout.regions().iter().filter(|r| r.contains(*vaddr)).count();
                    assert_eq!(inside, 1);
                    let _ = layout.classify(*vaddr) == Region::Other;
                }
                TraceEvent::Directive(Directive::Update) => {
                    assert!(per_iter > 0);
                    per_iter = 0;
                }
                _ => {}
            }
        }
    }

    #[test]
    fn weights_are_stable_and_bounded() {
        assert_eq!(edge_weight(3, 9), edge_weight(3, 9));
        assert!((0..100).all(|i| (1..=16).contains(&edge_weight(i, i * 7))));
    }
}
