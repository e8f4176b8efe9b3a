//! CSR graphs, a seeded generator and vertex churn.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, GraphError};

pub const CSR_MAGIC: &[u8; 4] = b"CSR1";

/// Zipf exponent for power-law out-degrees.
pub const ZIPF_EXPONENT: f64 = 1.8;

/// Directed graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<u64>,
    neighbors: Vec<u64>,
}

impl Graph {
    pub fn new(offsets: Vec<u64>, neighbors: Vec<u64>) -> Result<Self, GraphError> {
        let g = Self { offsets, neighbors };
        g.validate()?;
        Ok(g)
    }

    /// Builds a CSR from an edge list; edges keep their relative order per
    /// source.
    pub fn from_edges(vertex_count: usize, edges: &[(u64, u64)]) -> Result<Self, GraphError> {
        let mut counts = vec![0u64; vertex_count + 1];
        for &(s, d) in edges {
            if s as usize >= vertex_count || d as usize >= vertex_count {
                return Err(GraphError::Invalid(format!("edge ({s},{d}) out of range")));
            }
            counts[s as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut neighbors = vec![0; edges.len()];
        for &(s, d) in edges {
            neighbors[fill[s as usize] as usize] = d;
            fill[s as usize] += 1;
        }
        Self::new(counts, neighbors)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let Some(&last) = self.offsets.last() else {
            return Err(GraphError::Invalid("empty offset array".into()));
        };
        if self.offsets[0] != 0 {
            return Err(GraphError::Invalid("offsets must start at 0".into()));
        }
        if last != self.neighbors.len() as u64 {
            return Err(GraphError::Invalid(format!("last offset {last} != edge count {}", self.neighbors.len())));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(GraphError::Invalid("offsets decrease".into()));
        }
        let n = self.vertex_count() as u64;
        if let Some(bad) = self.neighbors.iter().find(|&&u| u >= n) {
            return Err(GraphError::Invalid(format!("neighbor {bad} >= vertex count {n}")));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[u64] {
        &self.neighbors
    }

    /// Index range of `v`'s neighbors in the flat neighbor array.
    pub fn edge_range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v] as usize..self.offsets[v + 1] as usize
    }

    pub fn neighbors(&self, v: usize) -> &[u64] {
        &self.neighbors[self.edge_range(v)]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edge_range(v).len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.vertex_count()).flat_map(move |v| self.neighbors(v).iter().map(move |&u| (v as u64, u)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * (self.offsets.len() + self.neighbors.len()));
        out.extend_from_slice(CSR_MAGIC);
        out.extend_from_slice(&(self.vertex_count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.edge_count() as u64).to_le_bytes());
        for x in self.offsets.iter().chain(&self.neighbors) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GraphError> {
        if bytes.len() < 20 || &bytes[..4] != CSR_MAGIC {
            return Err(GraphError::Format("missing CSR1 header".into()));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (n, m) = (word(4) as usize, word(12) as usize);
        let need = n.checked_add(1).and_then(|x| x.checked_add(m)).and_then(|w| w.checked_mul(8)).and_then(|b| b.checked_add(20));
        if need != Some(bytes.len()) {
            return Err(GraphError::Format(format!("length {} does not match {n} vertices and {m} edges", bytes.len())));
        }
        let words: Vec<u64> = (0..n + 1 + m).map(|i| word(20 + 8 * i)).collect();
        Self::new(words[..n + 1].to_vec(), words[n + 1..].to_vec())
    }

    pub fn write_file(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, GraphError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeModel {
    #[default]
    Uniform,
    PowerLaw,
}

fn check_gen(vertex_count: usize, avg_degree: f64) -> Result<(), ConfigError> {
    if vertex_count < 2 {
        return Err(ConfigError::invalid("workload.vertices", "must be >= 2"));
    }
    if !(avg_degree >= 1.0) {
        return Err(ConfigError::invalid("workload.degree", "must be >= 1"));
    }
    if avg_degree >= vertex_count as f64 {
        return Err(ConfigError::invalid("workload.degree", "must be below the vertex count"));
    }
    Ok(())
}

fn random_other(rng: &mut ChaCha8Rng, n: usize, not: usize) -> u64 {
    let u = rng.gen_range(0..n - 1);
    (if u >= not { u + 1 } else { u }) as u64
}

/// Out-degrees for each vertex summing to roughly `n * avg_degree`.
fn degrees(n: usize, avg_degree: f64, model: DegreeModel, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total = (n as f64 * avg_degree).round() as usize;
    match model {
        DegreeModel::Uniform => {
            let mut d = vec![0; n];
            for _ in 0..total {
                d[rng.gen_range(0..n)] += 1;
            }
            d
        }
        DegreeModel::PowerLaw => {
            let weights: Vec<f64> = (1..n).map(|k| (k as f64).powf(-ZIPF_EXPONENT)).collect();
            let zipf = WeightedIndex::new(&weights).expect("positive weights");
            let raw: Vec<f64> = (0..n).map(|_| (zipf.sample(rng) + 1) as f64).collect();
            let scale = total as f64 / raw.iter().sum::<f64>();
            raw.iter().map(|k| ((k * scale).round() as usize).min(n - 1)).collect()
        }
    }
}

/// Seeded random graph without self loops.
pub fn gen_graph(vertex_count: usize, avg_degree: f64, model: DegreeModel, seed: u64) -> Result<Graph, GraphError> {
    check_gen(vertex_count, avg_degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degs = degrees(vertex_count, avg_degree, model, &mut rng);
    let mut edges = Vec::with_capacity(degs.iter().sum());
    for (v, &d) in degs.iter().enumerate() {
        for _ in 0..d {
            edges.push((v as u64, random_other(&mut rng, vertex_count, v)));
        }
    }
    Graph::from_edges(vertex_count, &edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationSchedule {
    pub add_fraction: f64,
    pub delete_fraction: f64,
    pub seed: u64,
}

impl MutationSchedule {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, f) in [("add_fraction", self.add_fraction), ("delete_fraction", self.delete_fraction)] {
            if !(0.0..=0.5).contains(&f) {
                return Err(ConfigError::invalid(format!("mutation.{name}"), "must be in [0, 0.5]"));
            }
        }
        Ok(())
    }
}

/// Result of [`mutate_with_log`].
#[derive(Debug, Clone)]
pub struct Mutation {
    pub graph: Graph,
    /// Isolated vertices, ascending.
    pub deleted: Vec<u64>,
    /// First id of the appended vertices.
    pub first_added: u64,
}

/// Isolates a random `delete_fraction` of the vertices and appends
/// `add_fraction` new ones, each with out- and in-edges to surviving
/// vertices at the graph's average degree.
pub fn mutate(graph: &Graph, schedule: &MutationSchedule) -> Result<Graph, GraphError> {
    Ok(mutate_with_log(graph, schedule)?.graph)
}

pub fn mutate_with_log(graph: &Graph, schedule: &MutationSchedule) -> Result<Mutation, GraphError> {
    schedule.validate()?;
    let n = graph.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let n_del = (n as f64 * schedule.delete_fraction).round() as usize;
    let n_add = (n as f64 * schedule.add_fraction).round() as usize;
    let mut deleted: Vec<u64> = sample(&mut rng, n, n_del).into_iter().map(|v| v as u64).collect();
    deleted.sort_unstable();
    let gone: HashSet<u64> = deleted.iter().copied().collect();
    let mut edges: Vec<(u64, u64)> = graph.edges().filter(|(s, d)| !gone.contains(s) && !gone.contains(d)).collect();
    let alive: Vec<u64> = (0..n as u64).filter(|v| !gone.contains(v)).collect();
    let total = n + n_add;
    if n_add > 0 && !alive.is_empty() {
        let avg = (graph.edge_count() as f64 / n as f64).max(1.0);
        for k in 0..n_add {
            let v = (n + k) as u64;
            let d = (avg.floor() as usize + rng.gen_bool(avg.fract()) as usize).min(alive.len());
            for _ in 0..d {
                edges.push((v, alive[rng.gen_range(0..alive.len())]));
                edges.push((alive[rng.gen_range(0..alive.len())], v));
            }
        }
    }
    Ok(Mutation { graph: Graph::from_edges(total, &edges)?, deleted, first_added: n as u64 })
}

/// Two inputs for back-to-back runs over the same vertex ids: a random 10%
/// is held out of the first version; the second deletes another 10% and
/// restores the held-out vertices with their edges.
pub fn two_versions(graph: &Graph, seed: u64) -> Result<(Graph, Graph), GraphError> {
    let n = graph.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n / 10;
    let picked = sample(&mut rng, n, 2 * k).into_vec();
    let held: HashSet<u64> = picked[..k].iter().map(|&v| v as u64).collect();
    let dropped: HashSet<u64> = picked[k..].iter().map(|&v| v as u64).collect();
    let keep = |set: &HashSet<u64>| -> Result<Graph, GraphError> {
        let edges: Vec<_> = graph.edges().filter(|(s, d)| !set.contains(s) && !set.contains(d)).collect();
        Graph::from_edges(n, &edges)
    };
    Ok((keep(&held)?, keep(&dropped)?))
}
