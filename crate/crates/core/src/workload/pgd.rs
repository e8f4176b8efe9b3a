//! Reference PageRank-Delta evaluation, used to derive per-iteration
//! active sets.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdParams<T> {
    /// Damping fraction.
    pub alpha: T,
    /// A vertex stays active while its |delta| exceeds this.
    pub delta_threshold: T,
    /// Stop once the summed |delta| of an iteration falls below this.
    pub epsilon: T,
    pub max_iterations: usize,
}

impl<T: Float> PgdParams<T> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(ConfigError::invalid("workload.pgd.alpha", "must be in (0, 1)"));
        }
        if !(self.delta_threshold > T::zero()) {
            return Err(ConfigError::invalid("workload.pgd.delta_threshold", "must be > 0"));
        }
        if !(self.epsilon > T::zero()) {
            return Err(ConfigError::invalid("workload.pgd.epsilon", "must be > 0"));
        }
        Ok(())
    }
}

impl<T: Float> Default for PgdParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::from(0.85).unwrap(),
            delta_threshold: T::from(1e-6).unwrap(),
            epsilon: T::from(1e-9).unwrap(),
            max_iterations: 10,
        }
    }
}

/// Outcome of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdRun<T> {
    /// Active flags of every executed iteration, first iteration all true.
    pub active_sets: Vec<Vec<bool>>,
    pub rank: Vec<T>,
    pub converged: bool,
}

/// Push-style PageRank-Delta. Active vertices push `delta / out_degree` to
/// their neighbors; a vertex is active next iteration when its new delta
/// exceeds the threshold.
pub fn pgd_reference<T: Float>(g: &Graph, p: &PgdParams<T>) -> Result<PgdRun<T>, ConfigError> {
    p.validate()?;
    let n = g.vertex_count();
    let nf = T::from(n).unwrap();
    let mut delta = vec![T::one() / nf; n];
    let mut rank = vec![T::zero(); n];
    let mut active = vec![true; n];
    let mut sets = Vec::new();
    let mut converged = false;
    for it in 0..p.max_iterations {
        if !active.iter().any(|&a| a) {
            converged = true;
            break;
        }
        sets.push(active.clone());
        let mut ngh = vec![T::zero(); n];
        for v in (0..n).filter(|&v| active[v]) {
            let d = g.out_degree(v);
            if d == 0 {
                continue;
            }
            let share = delta[v] / T::from(d).unwrap();
            for &u in g.neighbors(v) {
                ngh[u as usize] = ngh[u as usize] + share;
            }
        }
        let mut error = T::zero();
        for v in 0..n {
            delta[v] = p.alpha * ngh[v];
            if it == 0 {
                delta[v] = delta[v] + (T::one() - p.alpha) / nf;
            }
            rank[v] = rank[v] + delta[v];
            active[v] = delta[v].abs() > p.delta_threshold;
            error = error + delta[v].abs();
        }
        if error < p.epsilon {
            converged = true;
            break;
        }
    }
    Ok(PgdRun { active_sets: sets, rank, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::graph::{gen_graph, DegreeModel};

    #[test]
    fn single_vertex_converges_fast() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let run = pgd_reference(&g, &PgdParams::<f64>::default()).unwrap();
        assert!(run.active_sets.len() <= 2);
        assert!(run.converged);
    }

    #[test]
    fn active_sets_shrink_on_random_graph() {
        let g = gen_graph(500, 6.0, DegreeModel::PowerLaw, 4).unwrap();
        let p = PgdParams { delta_threshold: 2e-4, max_iterations: 30, ..PgdParams::<f64>::default() };
        let run = pgd_reference(&g, &p).unwrap();
        let sizes: Vec<usize> = run.active_sets.iter().map(|a| a.iter().filter(|&&x| x).count()).collect();
        assert_eq!(sizes[0], 500);
        assert!(sizes.last().unwrap() < &500);
    }

    #[test]
    fn f32_and_f64_agree_on_a_small_graph() {
        let g = gen_graph(40, 3.0, DegreeModel::Uniform, 8).unwrap();
        let a = pgd_reference(&g, &PgdParams::<f64> { delta_threshold: 1e-3, ..Default::default() }).unwrap();
        let b = pgd_reference(&g, &PgdParams::<f32> { delta_threshold: 1e-3, ..Default::default() }).unwrap();
        assert_eq!(a.active_sets.len(), b.active_sets.len());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = PgdParams::<f64> { alpha: 1.0, ..Default::default() };
        assert_eq!(p.validate().unwrap_err().field, "workload.pgd.alpha");
    }
}
