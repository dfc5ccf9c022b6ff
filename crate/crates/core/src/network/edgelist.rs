//! Plain-text edge lists.
//!
//! ```text
//! # directed n=3
//! 0 1
//! 1 2 0.5
//! ```
//!
//! The header is `# directed n=<n>` or `# bipartite n=<banks> m=<assets>`,
//! followed by one `src dst [weight]` line per edge, 0-indexed. Bipartite
//! lines are `bank asset shares`.

use std::fmt::Write as _;
use std::path::Path;

use super::{BipartiteGraph, DirectedGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeListGraph {
    Directed(DirectedGraph),
    Bipartite(BipartiteGraph),
}

impl DirectedGraph {
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# directed n={}\n", self.node_count());
        match self.weights() {
            Some(w) => {
                for (&(i, j), w) in self.edges().iter().zip(w) {
                    let _ = writeln!(out, "{i} {j} {w}");
                }
            }
            None => {
                for &(i, j) in self.edges() {
                    let _ = writeln!(out, "{i} {j}");
                }
            }
        }
        out
    }
}

impl BipartiteGraph {
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# bipartite n={} m={}\n", self.n_banks(), self.m_assets());
        for &(b, a, s) in self.holdings() {
            let _ = writeln!(out, "{b} {a} {s}");
        }
        out
    }
}

fn header_field(tokens: &[&str], key: &str) -> Result<usize> {
    let prefix = format!("{key}=");
    let raw = tokens
        .iter()
        .find_map(|t| t.strip_prefix(&prefix))
        .ok_or_else(|| Error::Parse(format!("header lacks `{key}=`")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("bad {key} value `{raw}`")))
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad node index `{tok}`")))
}

fn parse_weight(tok: &str, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad weight `{tok}`")))
}

pub fn parse_edge_list(text: &str) -> Result<EdgeListGraph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
    let tokens: Vec<&str> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `#` header line".into()))?
        .split_whitespace()
        .collect();
    match tokens.first() {
        Some(&"directed") => {
            let n = header_field(&tokens, "n")?;
            let mut edges = Vec::new();
            let mut weights = Vec::new();
            let mut weighted = None;
            for (no, line) in lines {
                let no = no + 1;
                let f: Vec<&str> = line.split_whitespace().collect();
                let has_weight = match f.len() {
                    2 => false,
                    3 => true,
                    _ => return Err(Error::Parse(format!("line {no}: expected `src dst [weight]`"))),
                };
                if *weighted.get_or_insert(has_weight) != has_weight {
                    return Err(Error::Parse(format!("line {no}: mixed weighted and unweighted edges")));
                }
                edges.push((parse_index(f[0], no)?, parse_index(f[1], no)?));
                if has_weight {
                    weights.push(parse_weight(f[2], no)?);
                }
            }
            let g = if weighted == Some(true) {
                DirectedGraph::with_weights(n, edges, weights)?
            } else {
                DirectedGraph::new(n, edges)?
            };
            Ok(EdgeListGraph::Directed(g))
        }
        Some(&"bipartite") => {
            let n = header_field(&tokens, "n")?;
            let m = header_field(&tokens, "m")?;
            let mut holdings = Vec::new();
            for (no, line) in lines {
                let no = no + 1;
                let f: Vec<&str> = line.split_whitespace().collect();
                let shares = match f.len() {
                    2 => 1.0,
                    3 => parse_weight(f[2], no)?,
                    _ => return Err(Error::Parse(format!("line {no}: expected `bank asset [shares]`"))),
                };
                holdings.push((parse_index(f[0], no)?, parse_index(f[1], no)?, shares));
            }
            Ok(EdgeListGraph::Bipartite(BipartiteGraph::new(n, m, holdings)?))
        }
        _ => Err(Error::Parse(format!("unknown graph kind in header `{header}`"))),
    }
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<EdgeListGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_lines() {
        let g = DirectedGraph::with_weights(3, vec![(0, 1), (2, 0)], vec![0.25, 1.5]).unwrap();
        assert_eq!(g.to_edge_list(), "# directed n=3\n0 1 0.25\n2 0 1.5\n");
        let b = BipartiteGraph::new(2, 3, vec![(1, 2, 1.0)]).unwrap();
        assert_eq!(b.to_edge_list(), "# bipartite n=2 m=3\n1 2 1\n");
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("0 1\n").is_err());
        assert!(parse_edge_list("# undirected n=2\n").is_err());
        assert!(parse_edge_list("# directed\n0 1\n").is_err());
        assert!(parse_edge_list("# directed n=2\n0 1 1.0\n1 0\n").is_err());
        assert!(parse_edge_list("# directed n=2\n0 0\n").is_err());
        assert!(parse_edge_list("# directed n=2\n0 x\n").is_err());
    }

    proptest! {
        #[test]
        fn directed_round_trip(n in 2usize..12, raw in proptest::collection::vec((0usize..12, 0usize..12, 0.001f64..1e6), 0..40)) {
            let mut seen = std::collections::HashSet::new();
            let mut edges = Vec::new();
            let mut weights = Vec::new();
            for (i, j, w) in raw {
                let (i, j) = (i % n, j % n);
                if i != j && seen.insert((i, j)) {
                    edges.push((i, j));
                    weights.push(w);
                }
            }
            // An empty weighted list reads back as unweighted.
            prop_assume!(!edges.is_empty());
            let g = DirectedGraph::with_weights(n, edges, weights).unwrap();
            prop_assert_eq!(parse_edge_list(&g.to_edge_list()).unwrap(), EdgeListGraph::Directed(g));
        }
    }
}
