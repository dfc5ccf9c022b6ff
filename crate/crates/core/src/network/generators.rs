use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{BipartiteGraph, DirectedGraph};
use crate::rng::Rng;
use crate::{Error, Result};

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_skip(rng: &mut Rng, log_q: f64) -> u64 {
    let u: f64 = rng.random();
    let skip = ((1.0 - u).ln() / log_q).floor();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

fn connection_probability(n: usize, z: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param(format!("need at least 2 nodes, got {n}")));
    }
    let max = (n - 1) as f64;
    if !(z.is_finite() && (0.0..=max).contains(&z)) {
        return Err(Error::param(format!("mean degree {z} outside [0, {max}]")));
    }
    Ok(z / max)
}

/// Directed G(n, p) with `p = z / (n - 1)`: every ordered pair is an edge
/// independently. Sampled by geometric skipping, so the cost is linear in
/// the number of edges.
pub fn gen_erdos_renyi_directed(n: usize, z: f64, rng: &mut Rng) -> Result<DirectedGraph> {
    let p = connection_probability(n, z)?;
    let row = (n - 1) as u64;
    let total = n as u64 * row;
    let pair = |idx: u64| {
        let i = (idx / row) as usize;
        let jj = (idx % row) as usize;
        (i, if jj >= i { jj + 1 } else { jj })
    };
    let edges: Vec<(usize, usize)> = if p == 0.0 {
        Vec::new()
    } else if p >= 1.0 {
        (0..total).map(pair).collect()
    } else {
        let log_q = (1.0 - p).ln();
        let mut edges = Vec::with_capacity((total as f64 * p * 1.1) as usize + 16);
        let mut idx = geometric_skip(rng, log_q);
        while idx < total {
            edges.push(pair(idx));
            idx = idx.saturating_add(1).saturating_add(geometric_skip(rng, log_q));
        }
        edges
    };
    Ok(DirectedGraph::from_valid_edges(n, edges))
}

/// Undirected G(n, p) with `p = z / (n - 1)`, returned with both orientations
/// of every edge so that out-neighbourhoods are the undirected neighbourhoods.
pub fn gen_erdos_renyi_undirected(n: usize, z: f64, rng: &mut Rng) -> Result<DirectedGraph> {
    let p = connection_probability(n, z)?;
    let mut edges = Vec::new();
    if p >= 1.0 {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edges.push((i, j));
                }
            }
        }
    } else if p > 0.0 {
        // Batagelj-Brandes walk over the lower triangle.
        let log_q = (1.0 - p).ln();
        let (mut v, mut w) = (1u64, -1i64);
        let n64 = n as u64;
        while v < n64 {
            let skip = geometric_skip(rng, log_q).min(u64::MAX / 4);
            w = w.saturating_add(1 + skip as i64);
            while v < n64 && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n64 {
                edges.push((v as usize, w as usize));
                edges.push((w as usize, v as usize));
            }
        }
    }
    Ok(DirectedGraph::from_valid_edges(n, edges))
}

#[derive(Debug, Clone, Copy)]
pub struct ConfigurationModelOptions {
    /// Rewiring attempts allowed per invalid stub pair.
    pub rewire_attempts: usize,
    /// When false, pairs left invalid after rewiring are an error instead of
    /// being erased.
    pub allow_discard: bool,
}

impl Default for ConfigurationModelOptions {
    fn default() -> Self {
        Self {
            rewire_attempts: 100,
            allow_discard: true,
        }
    }
}

/// Realised configuration-model graph. `discarded_pairs` stub pairs were
/// erased, so each of the out- and in-degree sequences falls short of the
/// request by exactly that many stubs in total.
#[derive(Debug, Clone)]
pub struct ConfigurationModel {
    pub graph: DirectedGraph,
    pub discarded_pairs: usize,
}

/// Directed configuration model by stub matching. Self-loops and repeated
/// pairs are first repaired by double-edge swaps against random accepted
/// edges; whatever cannot be repaired within the budget is erased.
pub fn gen_configuration_model(
    out_degrees: &[usize],
    in_degrees: &[usize],
    opts: ConfigurationModelOptions,
    rng: &mut Rng,
) -> Result<ConfigurationModel> {
    if out_degrees.len() != in_degrees.len() {
        return Err(Error::param(format!(
            "degree sequences differ in length: {} vs {}",
            out_degrees.len(),
            in_degrees.len()
        )));
    }
    let n = out_degrees.len();
    let out_total: usize = out_degrees.iter().sum();
    let in_total: usize = in_degrees.iter().sum();
    if out_total != in_total {
        return Err(Error::param(format!("stub sums differ: {out_total} out vs {in_total} in")));
    }
    let out_stubs: Vec<usize> = stubs(out_degrees);
    let mut in_stubs: Vec<usize> = stubs(in_degrees);
    in_stubs.shuffle(rng);

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(out_total);
    let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(out_total);
    let mut pending = Vec::new();
    for (&u, &v) in out_stubs.iter().zip(&in_stubs) {
        if u == v || index.contains_key(&(u, v)) {
            pending.push((u, v));
        } else {
            index.insert((u, v), edges.len());
            edges.push((u, v));
        }
    }

    // Each invalid pair is swapped against a random accepted edge or another
    // invalid pair: (u,v),(x,y) -> (u,y),(x,v).
    let mut residual = Vec::new();
    while let Some((u, v)) = pending.pop() {
        let mut placed = false;
        for _ in 0..opts.rewire_attempts {
            let pool = edges.len() + pending.len();
            if pool == 0 {
                break;
            }
            let r = rng.random_range(0..pool);
            let (x, y) = if r < edges.len() { edges[r] } else { pending[r - edges.len()] };
            if u == y || x == v || (u, y) == (x, v) {
                continue;
            }
            if index.contains_key(&(u, y)) || index.contains_key(&(x, v)) {
                continue;
            }
            if r < edges.len() {
                index.remove(&(x, y));
                edges[r] = (u, y);
                index.insert((u, y), r);
            } else {
                pending.swap_remove(r - edges.len());
                index.insert((u, y), edges.len());
                edges.push((u, y));
            }
            index.insert((x, v), edges.len());
            edges.push((x, v));
            placed = true;
            break;
        }
        if !placed {
            residual.push((u, v));
        }
    }
    if !residual.is_empty() && !opts.allow_discard {
        return Err(Error::Construction {
            message: format!("{} stub pairs could not be rewired", residual.len()),
            residual_stubs: 2 * residual.len(),
        });
    }
    Ok(ConfigurationModel {
        graph: DirectedGraph::from_valid_edges(n, edges),
        discarded_pairs: residual.len(),
    })
}

fn stubs(degrees: &[usize]) -> Vec<usize> {
    degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(i, d))
        .collect()
}

/// Bipartite Erdős-Rényi holdings: each (bank, asset) pair is linked with
/// probability `mean_diversification / m_assets`, one share per link.
pub fn gen_bipartite_er(
    n_banks: usize,
    m_assets: usize,
    mean_diversification: f64,
    rng: &mut Rng,
) -> Result<BipartiteGraph> {
    if m_assets == 0 {
        return Err(Error::param("need at least one asset"));
    }
    let max = m_assets as f64;
    if !(mean_diversification.is_finite() && (0.0..=max).contains(&mean_diversification)) {
        return Err(Error::param(format!(
            "mean diversification {mean_diversification} outside [0, {max}]"
        )));
    }
    let p = mean_diversification / max;
    let mut holdings = Vec::new();
    for b in 0..n_banks {
        for a in 0..m_assets {
            if rng.random_bool(p) {
                holdings.push((b, a, 1.0));
            }
        }
    }
    BipartiteGraph::new(n_banks, m_assets, holdings)
}
