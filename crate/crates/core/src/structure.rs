//! Core-periphery detection by block-pattern error minimization.
//!
//! The ideal pattern asks for a complete core and an empty periphery; links
//! between the two blocks are unconstrained. The error of a partition is the
//! number of missing core-core links plus the number of present
//! periphery-periphery links, counted over unordered pairs.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::network::DirectedGraph;
use crate::rng::{child_seed, seeded, Rng};
use crate::{Error, Result};

/// Symmetric 0/1 adjacency with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    rows: Vec<Vec<bool>>,
    degrees: Vec<usize>,
}

impl Adjacency {
    /// Nonzero entries are links. Rejects asymmetric input and self-loops.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let n = crate::linalg::check_square(m, "adjacency")?;
        for i in 0..n {
            if m[i][i] != 0.0 {
                return Err(Error::param(format!("adjacency has a self-loop at node {i}")));
            }
            for j in (i + 1)..n {
                if (m[i][j] != 0.0) != (m[j][i] != 0.0) {
                    return Err(Error::param(format!("adjacency is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_rows(m.iter().map(|r| r.iter().map(|&v| v != 0.0).collect()).collect()))
    }

    /// Undirected graph on `n` nodes; self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![vec![false; n]; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u != v {
                rows[u][v] = true;
                rows[v][u] = true;
            }
        }
        Ok(Self::from_rows(rows))
    }

    /// Undirected projection: `i` and `j` are linked if either direction is.
    pub fn from_directed(g: &DirectedGraph) -> Self {
        Self::from_edges(g.node_count(), g.edges()).expect("graph edges are in range")
    }

    fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let degrees = rows.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
        Self { rows, degrees }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i][j]
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    pub fn to_matrix(&self) -> Matrix {
        self.rows.iter().map(|r| r.iter().map(|&b| f64::from(u8::from(b))).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorePeripheryPartition {
    /// Sorted core members.
    pub core: Vec<usize>,
    pub error: usize,
    /// `error` over the number of pairs inside the core and inside the
    /// periphery; zero when there are no such pairs.
    pub normalized_error: f64,
}

impl CorePeripheryPartition {
    fn new(adj: &Adjacency, in_core: &[bool], error: usize) -> Self {
        let core: Vec<usize> = (0..in_core.len()).filter(|&i| in_core[i]).collect();
        let comparable = pairs(core.len()) + pairs(adj.len() - core.len());
        Self {
            normalized_error: if comparable == 0 { 0.0 } else { error as f64 / comparable as f64 },
            core,
            error,
        }
    }

    pub fn membership(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.core {
            m[i] = true;
        }
        m
    }
}

fn pairs(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

fn membership_error(adj: &Adjacency, in_core: &[bool]) -> usize {
    let n = adj.len();
    let mut err = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            match (in_core[i], in_core[j]) {
                (true, true) if !adj.rows[i][j] => err += 1,
                (false, false) if adj.rows[i][j] => err += 1,
                _ => {}
            }
        }
    }
    err
}

/// Missing core-core links plus present periphery-periphery links.
pub fn core_periphery_error(adj: &Adjacency, core: &[usize]) -> Result<usize> {
    let mut in_core = vec![false; adj.len()];
    for &c in core {
        if c >= adj.len() {
            return Err(Error::param(format!("core node {c} out of range")));
        }
        in_core[c] = true;
    }
    Ok(membership_error(adj, &in_core))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub restarts: usize,
    /// Annealing proposals per node and restart.
    pub sweeps: usize,
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub seed: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            sweeps: 200,
            initial_temperature: 2.0,
            final_temperature: 0.02,
            seed: 0,
        }
    }
}

/// Partition state with incrementally maintained core degrees.
struct State<'a> {
    adj: &'a Adjacency,
    in_core: Vec<bool>,
    core_degree: Vec<usize>,
    core_size: usize,
    error: usize,
}

impl<'a> State<'a> {
    fn new(adj: &'a Adjacency, in_core: Vec<bool>) -> Self {
        let n = adj.len();
        let core_degree = (0..n)
            .map(|i| (0..n).filter(|&j| in_core[j] && adj.rows[i][j]).count())
            .collect();
        let error = membership_error(adj, &in_core);
        let core_size = in_core.iter().filter(|&&b| b).count();
        Self {
            adj,
            in_core,
            core_degree,
            core_size,
            error,
        }
    }

    /// Change in error if `v` switches side.
    fn delta(&self, v: usize) -> i64 {
        let c = self.core_degree[v] as i64;
        let p = self.adj.degrees[v] as i64 - c;
        let k = self.core_size as i64;
        if self.in_core[v] {
            p - (k - 1 - c)
        } else {
            (k - c) - p
        }
    }

    fn flip(&mut self, v: usize) {
        let d = self.delta(v);
        self.error = (self.error as i64 + d) as usize;
        let joining = !self.in_core[v];
        self.in_core[v] = joining;
        if joining {
            self.core_size += 1;
        } else {
            self.core_size -= 1;
        }
        for (u, &linked) in self.adj.rows[v].iter().enumerate() {
            if linked {
                if joining {
                    self.core_degree[u] += 1;
                } else {
                    self.core_degree[u] -= 1;
                }
            }
        }
    }

    /// Improving single-node moves until none is left, then zero-cost moves
    /// out of the core.
    fn descend(&mut self) {
        let n = self.adj.len();
        loop {
            let mut moved = false;
            for v in 0..n {
                if self.delta(v) < 0 {
                    self.flip(v);
                    moved = true;
                }
            }
            if moved {
                continue;
            }
            for v in 0..n {
                if self.in_core[v] && self.delta(v) == 0 {
                    self.flip(v);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        assert_eq!(
            self.error,
            membership_error(self.adj, &self.in_core),
            "incremental error drifted from recount"
        );
    }

    fn anneal(&mut self, opts: &DetectOptions, rng: &mut Rng) {
        let n = self.adj.len();
        let steps = opts.sweeps * n;
        if steps == 0 {
            return;
        }
        let cooling = (opts.final_temperature / opts.initial_temperature).powf(1.0 / steps as f64);
        let mut t = opts.initial_temperature;
        for _ in 0..steps {
            let v = rng.random_range(0..n);
            let d = self.delta(v);
            if d <= 0 || rng.random::<f64>() < (-(d as f64) / t).exp() {
                self.flip(v);
            }
            t *= cooling;
        }
    }
}

/// Orders partitions by error, then core size, then lexicographic core.
fn better(a: &CorePeripheryPartition, b: &CorePeripheryPartition) -> bool {
    (a.error, a.core.len(), &a.core) < (b.error, b.core.len(), &b.core)
}

pub fn core_periphery_detect(adj: &Adjacency) -> Result<CorePeripheryPartition> {
    core_periphery_detect_with(adj, DetectOptions::default())
}

/// Simulated annealing from random starts, each finished by greedy descent.
/// Restarts run in parallel and the best is chosen in restart order, so the
/// result depends only on the adjacency and the seed.
pub fn core_periphery_detect_with(adj: &Adjacency, opts: DetectOptions) -> Result<CorePeripheryPartition> {
    let n = adj.len();
    if n < 2 {
        return Err(Error::param("core-periphery detection needs at least two nodes"));
    }
    if opts.restarts == 0 {
        return Err(Error::param("at least one restart is required"));
    }
    if !(opts.initial_temperature > 0.0 && opts.final_temperature > 0.0) {
        return Err(Error::param("annealing temperatures must be positive"));
    }
    let found: Vec<CorePeripheryPartition> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(child_seed(opts.seed, 0, r as u64));
            let start = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let mut state = State::new(adj, start);
            state.anneal(&opts, &mut rng);
            state.descend();
            CorePeripheryPartition::new(adj, &state.in_core, state.error)
        })
        .collect();
    let mut best = found[0].clone();
    for p in &found[1..] {
        if better(p, &best) {
            best = p.clone();
        }
    }
    Ok(best)
}

/// Planted structure: a clique on nodes `0..core_size`, each remaining node
/// linked to `links` distinct core nodes. A fraction `noise` of the links is
/// then rewired: that many links are deleted and as many absent pairs are
/// added, both chosen uniformly.
pub fn planted_core_periphery(n: usize, core_size: usize, links: usize, noise: f64, rng: &mut Rng) -> Result<Adjacency> {
    if core_size > n || links > core_size {
        return Err(Error::param(format!(
            "need links <= core_size <= n, got {links}, {core_size}, {n}"
        )));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::param(format!("noise must lie in [0, 1], got {noise}")));
    }
    let mut rows = vec![vec![false; n]; n];
    for i in 0..core_size {
        for j in (i + 1)..core_size {
            rows[i][j] = true;
            rows[j][i] = true;
        }
    }
    for v in core_size..n {
        for c in sample(rng, core_size, links) {
            rows[v][c] = true;
            rows[c][v] = true;
        }
    }
    let mut present = Vec::new();
    let mut absent = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rows[i][j] {
                present.push((i, j));
            } else {
                absent.push((i, j));
            }
        }
    }
    let k = ((noise * present.len() as f64).round() as usize).min(absent.len());
    let removed: Vec<(usize, usize)> = sample(rng, present.len(), k).into_iter().map(|e| present[e]).collect();
    let added: Vec<(usize, usize)> = sample(rng, absent.len(), k).into_iter().map(|e| absent[e]).collect();
    for (i, j) in removed {
        rows[i][j] = false;
        rows[j][i] = false;
    }
    for (i, j) in added {
        rows[i][j] = true;
        rows[j][i] = true;
    }
    Ok(Adjacency::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(adj: &Adjacency) -> usize {
        let n = adj.len();
        (0u32..1 << n)
            .map(|mask| {
                let m: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                membership_error(adj, &m)
            })
            .min()
            .unwrap()
    }

    #[test]
    fn ideal_patterns_have_zero_error() {
        let complete = Adjacency::from_matrix(&(0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i != j))).collect()).collect()).unwrap();
        assert_eq!(core_periphery_error(&complete, &[0, 1, 2, 3]).unwrap(), 0);
        let empty = Adjacency::from_edges(5, &[]).unwrap();
        assert_eq!(core_periphery_error(&empty, &[]).unwrap(), 0);
        let star = Adjacency::from_edges(5, &[(0, 1), (0, 2), (1, 2), (3, 0), (4, 1)]).unwrap();
        assert_eq!(core_periphery_error(&star, &[0, 1, 2]).unwrap(), 0);
        assert_eq!(core_periphery_error(&star, &[]).unwrap(), 5);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        assert!(matches!(Adjacency::from_matrix(&m), Err(Error::Parameter(_))));
        assert!(Adjacency::from_matrix(&vec![vec![1.0]]).is_err());
    }

    #[test]
    fn single_edge_tie_break() {
        let adj = Adjacency::from_edges(2, &[(0, 1)]).unwrap();
        let p = core_periphery_detect(&adj).unwrap();
        assert_eq!(p.core, vec![0]);
        assert_eq!(p.error, 0);
    }

    #[test]
    fn planted_core_recovered_without_noise() {
        let mut rng = seeded(11);
        let adj = planted_core_periphery(60, 15, 3, 0.0, &mut rng).unwrap();
        let p = core_periphery_detect(&adj).unwrap();
        assert_eq!(p.core, (0..15).collect::<Vec<_>>());
        assert_eq!(p.error, 0);
    }

    #[test]
    fn matches_exhaustive_search_on_small_graphs() {
        let mut rng = seeded(5);
        for _ in 0..40 {
            let n = rng.random_range(2..=10);
            let density = rng.random_range(0.1..0.9);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|_| rng.random_bool(density))
                .collect();
            let adj = Adjacency::from_edges(n, &edges).unwrap();
            let p = core_periphery_detect(&adj).unwrap();
            assert_eq!(p.error, brute_force(&adj));
            assert_eq!(p.error, core_periphery_error(&adj, &p.core).unwrap());
        }
    }

    fn density_floor_ratio(n: usize, seed: u64) -> f64 {
        let mut rng = seeded(seed);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(0.5))
            .collect();
        let adj = Adjacency::from_edges(n, &edges).unwrap();
        let p = core_periphery_detect(&adj).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let base_core = core_periphery_error(&adj, &all).unwrap() as f64 / pairs(n) as f64;
        let base_periphery = adj.edge_count() as f64 / pairs(n) as f64;
        p.normalized_error / base_core.min(base_periphery)
    }

    #[test]
    fn random_graph_error_approaches_density_floor() {
        // Finite graphs leave degree fluctuations to exploit; the gain over
        // the trivial partitions shrinks as n grows.
        let small = density_floor_ratio(100, 3);
        let large = density_floor_ratio(800, 3);
        assert!(small < large && large < 1.0 + 1e-12, "{small} {large}");
        assert!(large > 0.9, "{large}");
    }

    #[test]
    fn incremental_state_matches_recount() {
        let mut rng = seeded(8);
        let adj = planted_core_periphery(30, 8, 2, 0.1, &mut rng).unwrap();
        let mut s = State::new(&adj, (0..30).map(|i| i % 3 == 0).collect());
        for step in 0..200 {
            s.flip((step * 7) % 30);
            assert_eq!(s.error, membership_error(&adj, &s.in_core));
        }
        s.descend();
    }

    #[test]
    fn detection_is_seed_deterministic() {
        let mut rng = seeded(4);
        let adj = planted_core_periphery(40, 10, 2, 0.05, &mut rng).unwrap();
        let a = core_periphery_detect(&adj).unwrap();
        let b = core_periphery_detect(&adj).unwrap();
        assert_eq!(a, b);
    }
}
