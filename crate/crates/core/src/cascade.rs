//! Zero-recovery default cascades on interbank exposure networks.
//!
//! A bank fails once the exposures it holds to failed counterparties exceed
//! its capital. Rounds are synchronous: every failure of round `t` is
//! charged to the lenders before any of them is tested in round `t + 1`.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::network::DirectedGraph;
use crate::rng::Rng;
use crate::{Error, Result};

/// Absolute slack on the default test `loss / A_IB > K / A_IB`.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankBalanceSheet {
    pub interbank_assets: f64,
    pub external_assets: f64,
    pub interbank_liabilities: f64,
    pub deposits: f64,
    /// Kept alongside the stocks so that shocks move it exactly; see
    /// [`BankBalanceSheet::identity_residual`].
    pub capital: f64,
}

impl BankBalanceSheet {
    pub fn is_solvent(&self) -> bool {
        self.capital > 0.0
    }

    /// `A_IB + A_E - L_IB - D - K`, zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        self.interbank_assets + self.external_assets - self.interbank_liabilities - self.deposits - self.capital
    }
}

/// Balance-sheet calibration: capital ratio `R_bar = K / A_IB`, the
/// interbank asset volume of every lender, and external assets as a multiple
/// of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetSpec {
    #[serde(rename = "R_bar")]
    pub r_bar: f64,
    #[serde(rename = "A_IB", default = "one")]
    pub a_ib: f64,
    #[serde(default = "four")]
    pub external_ratio: f64,
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

impl SheetSpec {
    pub fn new(r_bar: f64, a_ib: f64) -> Self {
        Self {
            r_bar,
            a_ib,
            external_ratio: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InterbankSystem {
    graph: DirectedGraph,
    sheets: Vec<BankBalanceSheet>,
    defaulted: Vec<bool>,
}

impl InterbankSystem {
    /// Checks that every lender's interbank assets and every borrower's
    /// interbank liabilities equal the corresponding edge-weight sums.
    pub fn new(graph: DirectedGraph, sheets: Vec<BankBalanceSheet>) -> Result<Self> {
        let n = graph.node_count();
        if sheets.len() != n {
            return Err(Error::param(format!("{} balance sheets for {n} banks", sheets.len())));
        }
        let w = graph
            .weights()
            .ok_or_else(|| Error::param("exposure graph must be weighted"))?;
        let mut lent = vec![0.0; n];
        let mut borrowed = vec![0.0; n];
        for (&(i, j), &x) in graph.edges().iter().zip(w) {
            lent[i] += x;
            borrowed[j] += x;
        }
        for (i, s) in sheets.iter().enumerate() {
            let stocks = [s.interbank_assets, s.external_assets, s.interbank_liabilities, s.deposits];
            if stocks.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !s.capital.is_finite() {
                return Err(Error::param(format!("bank {i}: balance-sheet stocks must be non-negative")));
            }
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
            if !close(s.interbank_assets, lent[i]) && !(s.interbank_assets == 0.0 && lent[i] == 0.0) {
                return Err(Error::param(format!(
                    "bank {i}: interbank assets {} differ from exposures {}",
                    s.interbank_assets, lent[i]
                )));
            }
            if !close(s.interbank_liabilities, borrowed[i]) && !(s.interbank_liabilities == 0.0 && borrowed[i] == 0.0) {
                return Err(Error::param(format!(
                    "bank {i}: interbank liabilities {} differ from borrowing {}",
                    s.interbank_liabilities, borrowed[i]
                )));
            }
        }
        let defaulted = sheets.iter().map(|s| !s.is_solvent()).collect();
        Ok(Self { graph, sheets, defaulted })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn sheets(&self) -> &[BankBalanceSheet] {
        &self.sheets
    }

    pub fn len(&self) -> usize {
        self.sheets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sheets.is_empty()
    }

    /// Banks already insolvent before any contagion (for example after an
    /// external shock).
    pub fn predefaulted(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.defaulted[i]).collect()
    }
}

/// Gai-Kapadia calibration with the default external ratio of 4.
pub fn build_gai_kapadia_system(graph: &DirectedGraph, r_bar: f64, a_ib: f64) -> Result<InterbankSystem> {
    build_gai_kapadia_system_with(graph, &SheetSpec::new(r_bar, a_ib))
}

/// Every lender spreads `a_ib` evenly over its borrowers and holds capital
/// `r_bar * a_ib`. A bank with no borrowers keeps the `a_ib` allocation as
/// external assets. Deposits close the accounting identity; where they would
/// be negative, external assets are raised instead.
pub fn build_gai_kapadia_system_with(graph: &DirectedGraph, spec: &SheetSpec) -> Result<InterbankSystem> {
    let SheetSpec { r_bar, a_ib, external_ratio } = *spec;
    if !(r_bar.is_finite() && r_bar > 0.0) {
        return Err(Error::param(format!("capital ratio must be positive, got {r_bar}")));
    }
    if !(a_ib.is_finite() && a_ib > 0.0) {
        return Err(Error::param(format!("interbank assets per bank must be positive, got {a_ib}")));
    }
    if !(external_ratio.is_finite() && external_ratio >= 0.0) {
        return Err(Error::param(format!("external ratio must be non-negative, got {external_ratio}")));
    }
    let n = graph.node_count();
    let out = graph.out_degrees();
    let weights: Vec<f64> = graph.edges().iter().map(|&(i, _)| a_ib / out[i] as f64).collect();
    let mut borrowed = vec![0.0; n];
    for (&(_, j), &w) in graph.edges().iter().zip(&weights) {
        borrowed[j] += w;
    }
    let sheets = (0..n)
        .map(|i| {
            let (interbank_assets, mut external_assets) = if out[i] > 0 {
                (a_ib, external_ratio * a_ib)
            } else {
                (0.0, (external_ratio + 1.0) * a_ib)
            };
            let capital = r_bar * a_ib;
            let mut deposits = interbank_assets + external_assets - borrowed[i] - capital;
            if deposits < 0.0 {
                external_assets -= deposits;
                deposits = 0.0;
            }
            BankBalanceSheet {
                interbank_assets,
                external_assets,
                interbank_liabilities: borrowed[i],
                deposits,
                capital,
            }
        })
        .collect();
    let weighted = DirectedGraph::with_weights(n, graph.edges().to_vec(), weights)?;
    InterbankSystem::new(weighted, sheets)
}

/// Writes off `devaluation` of the bank's external assets against its
/// capital. A bank left with non-positive capital is marked defaulted.
pub fn apply_external_shock(system: &InterbankSystem, bank: usize, devaluation: f64) -> Result<InterbankSystem> {
    if bank >= system.len() {
        return Err(Error::param(format!("bank {bank} out of range")));
    }
    if !(0.0..=1.0).contains(&devaluation) {
        return Err(Error::param(format!("devaluation must lie in [0, 1], got {devaluation}")));
    }
    let mut out = system.clone();
    let s = &mut out.sheets[bank];
    let loss = devaluation * s.external_assets;
    s.external_assets -= loss;
    s.capital -= loss;
    if !s.is_solvent() {
        out.defaulted[bank] = true;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub initially_defaulted: Vec<usize>,
    pub finally_defaulted: Vec<usize>,
    pub rounds: usize,
    pub default_fraction: f64,
    /// Round 0 holds the seeds; entry `t` the banks failing in round `t`.
    pub per_round_defaults: Vec<Vec<usize>>,
}

/// Seeds each bank independently with probability `rho0`.
pub fn random_seeds(n: usize, rho0: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&rho0) {
        return Err(Error::param(format!("seed fraction must lie in [0, 1], got {rho0}")));
    }
    Ok((0..n).filter(|_| rng.random_bool(rho0)).collect())
}

pub fn simulate_default_cascade(system: &InterbankSystem, seeds: &[usize]) -> Result<CascadeOutcome> {
    let n = system.len();
    let mut failed = system.defaulted.clone();
    let mut initial: BTreeSet<usize> = system.predefaulted().into_iter().collect();
    for &s in seeds {
        if s >= n {
            return Err(Error::param(format!("seed {s} out of range for {n} banks")));
        }
        failed[s] = true;
        initial.insert(s);
    }
    let lenders = system.graph.in_adjacency();
    let w = system.graph.weights().expect("validated as weighted");
    let mut loss = vec![0.0; n];
    let mut frontier: Vec<usize> = initial.iter().copied().collect();
    let mut per_round = vec![frontier.clone()];
    let mut touched = Vec::new();
    loop {
        touched.clear();
        for &j in &frontier {
            for (&i, &e) in lenders.neighbors(j).iter().zip(lenders.edge_ids(j)) {
                if !failed[i] {
                    loss[i] += w[e];
                    touched.push(i);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let next: Vec<usize> = touched
            .iter()
            .copied()
            .filter(|&i| {
                let s = &system.sheets[i];
                loss[i] / s.interbank_assets > s.capital / s.interbank_assets + DEFAULT_TOLERANCE
            })
            .collect();
        if next.is_empty() {
            break;
        }
        for &i in &next {
            failed[i] = true;
        }
        per_round.push(next.clone());
        frontier = next;
    }
    let finally_defaulted: Vec<usize> = (0..n).filter(|&i| failed[i]).collect();
    Ok(CascadeOutcome {
        initially_defaulted: initial.into_iter().collect(),
        default_fraction: if n == 0 { 0.0 } else { finally_defaulted.len() as f64 / n as f64 },
        finally_defaulted,
        rounds: per_round.len() - 1,
        per_round_defaults: per_round,
    })
}

/// Draws seeds with [`random_seeds`] and runs the cascade.
pub fn simulate_random_cascade(system: &InterbankSystem, rho0: f64, rng: &mut Rng) -> Result<CascadeOutcome> {
    let seeds = random_seeds(system.len(), rho0, rng)?;
    simulate_default_cascade(system, &seeds)
}
