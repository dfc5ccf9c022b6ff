//! Graph types, random ensembles and exposure reconstruction.

mod degree;
mod edgelist;
mod generators;
mod reconstruction;

pub use degree::{sample_degree_sequence, DegreeDistribution, DegreeModel, DEFAULT_K_MAX};
pub use edgelist::{parse_edge_list, read_edge_list, EdgeListGraph};
pub use generators::{
    gen_bipartite_er, gen_configuration_model, gen_erdos_renyi_directed,
    gen_erdos_renyi_undirected, ConfigurationModel, ConfigurationModelOptions,
};
pub use reconstruction::{max_entropy_reconstruction, IpfOptions, MarginVector, Reconstruction};

use std::collections::HashSet;

use crate::{Error, Result};

/// Directed graph on nodes `0..n`. An edge `(i, j)` points from lender `i`
/// to borrower `j`; an optional weight is the exposure of `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        validate_edges(n, &edges)?;
        Ok(Self {
            n,
            edges,
            weights: None,
        })
    }

    pub fn with_weights(n: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        validate_edges(n, &edges)?;
        if weights.len() != edges.len() {
            return Err(Error::param(format!(
                "{} weights for {} edges",
                weights.len(),
                edges.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param(format!("edge weights must be positive, got {w}")));
        }
        Ok(Self {
            n,
            edges,
            weights: Some(weights),
        })
    }

    /// Builds a graph the caller guarantees to be valid (generator output).
    pub(crate) fn from_valid_edges(n: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(validate_edges(n, &edges).is_ok());
        Self {
            n,
            edges,
            weights: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Drops the weights, keeping the topology.
    pub fn unweighted(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.clone(),
            weights: None,
        }
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, _) in &self.edges {
            d[i] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(_, j) in &self.edges {
            d[j] += 1;
        }
        d
    }

    /// Out-neighbourhoods (borrowers of each lender).
    pub fn out_adjacency(&self) -> Csr {
        Csr::build(self.n, self.edges.iter().map(|&(i, j)| (i, j)))
    }

    /// In-neighbourhoods (lenders of each borrower).
    pub fn in_adjacency(&self) -> Csr {
        Csr::build(self.n, self.edges.iter().map(|&(i, j)| (j, i)))
    }
}

fn validate_edges(n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut seen = HashSet::with_capacity(edges.len());
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::param(format!("edge ({i}, {j}) out of range for n={n}")));
        }
        if i == j {
            return Err(Error::param(format!("self-loop at node {i}")));
        }
        if !seen.insert((i, j)) {
            return Err(Error::param(format!("duplicate edge ({i}, {j})")));
        }
    }
    Ok(())
}

/// Compressed adjacency lists. `edge_ids` maps each stored neighbour back to
/// the index of the edge in the source graph.
#[derive(Debug, Clone)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl Csr {
    fn build(n: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (src, _) in pairs.clone() {
            offsets[src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let m = offsets[n];
        let mut targets = vec![0; m];
        let mut edge_ids = vec![0; m];
        for (e, (src, dst)) in pairs.enumerate() {
            let slot = cursor[src];
            targets[slot] = dst;
            edge_ids[slot] = e;
            cursor[src] += 1;
        }
        Self {
            offsets,
            targets,
            edge_ids,
        }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_ids(&self, i: usize) -> &[usize] {
        &self.edge_ids[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Bank-asset holdings network. Each link `(bank, asset, shares)` records a
/// strictly positive number of shares.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_banks: usize,
    m_assets: usize,
    holdings: Vec<(usize, usize, f64)>,
}

impl BipartiteGraph {
    pub fn new(n_banks: usize, m_assets: usize, holdings: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(holdings.len());
        for &(b, a, s) in &holdings {
            if b >= n_banks || a >= m_assets {
                return Err(Error::param(format!(
                    "holding ({b}, {a}) out of range for {n_banks} banks, {m_assets} assets"
                )));
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::param(format!("share count must be positive, got {s}")));
            }
            if !seen.insert((b, a)) {
                return Err(Error::param(format!("duplicate holding ({b}, {a})")));
            }
        }
        Ok(Self {
            n_banks,
            m_assets,
            holdings,
        })
    }

    pub fn n_banks(&self) -> usize {
        self.n_banks
    }

    pub fn m_assets(&self) -> usize {
        self.m_assets
    }

    pub fn holdings(&self) -> &[(usize, usize, f64)] {
        &self.holdings
    }

    /// Number of distinct assets held by each bank.
    pub fn bank_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_banks];
        for &(b, _, _) in &self.holdings {
            d[b] += 1;
        }
        d
    }

    /// Dense `n_banks x m_assets` share matrix.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.m_assets]; self.n_banks];
        for &(b, a, s) in &self.holdings {
            q[b][a] = s;
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(DirectedGraph::new(3, vec![(0, 0)]).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 1), (0, 1)]).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 3)]).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 1), (1, 0)]).is_ok());
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(DirectedGraph::with_weights(2, vec![(0, 1)], vec![0.0]).is_err());
        assert!(DirectedGraph::with_weights(2, vec![(0, 1)], vec![-1.0]).is_err());
        assert!(DirectedGraph::with_weights(2, vec![(0, 1)], vec![]).is_err());
    }

    #[test]
    fn adjacency_views_agree_with_edges() {
        let g = DirectedGraph::new(4, vec![(0, 1), (0, 2), (3, 1), (2, 0)]).unwrap();
        let out = g.out_adjacency();
        assert_eq!(out.neighbors(0), &[1, 2]);
        assert_eq!(out.edge_ids(0), &[0, 1]);
        assert_eq!(out.degree(1), 0);
        let inn = g.in_adjacency();
        assert_eq!(inn.neighbors(1), &[0, 3]);
        assert_eq!(g.out_degrees(), vec![2, 0, 1, 1]);
        assert_eq!(g.in_degrees(), vec![1, 2, 1, 0]);
    }

    #[test]
    fn bipartite_validation() {
        assert!(BipartiteGraph::new(2, 2, vec![(0, 1, 1.0)]).is_ok());
        assert!(BipartiteGraph::new(2, 2, vec![(0, 2, 1.0)]).is_err());
        assert!(BipartiteGraph::new(2, 2, vec![(0, 1, 0.0)]).is_err());
        assert!(BipartiteGraph::new(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }
}
