//! Price-mediated contagion through overlapping portfolios.
//!
//! Banks hold shares `Q[i][a]` of assets priced `p[a]`; liabilities are the
//! gap between marked assets and initial equity. When banks sell, the price
//! of asset `a` falls with the fraction `l_a` of its initial float that has
//! been liquidated. Rounds are synchronous: sales are decided at the prices
//! in force when the round starts, executed together, then prices are
//! re-marked once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{spectral_radius_nonneg, Matrix, PowerIterationOptions};
use crate::network::BipartiteGraph;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPortfolio")]
pub struct PortfolioSystem {
    #[serde(rename = "Q")]
    q0: Matrix,
    p0: Vec<f64>,
    #[serde(rename = "E")]
    equity: Vec<f64>,
    lambda: Vec<f64>,
    lambda_max: Option<Vec<f64>>,
    marketable: Vec<bool>,
}

#[derive(Deserialize)]
struct RawPortfolio {
    #[serde(rename = "Q")]
    q0: Matrix,
    p0: Vec<f64>,
    #[serde(rename = "E")]
    equity: Vec<f64>,
    lambda: Option<Vec<f64>>,
    lambda_max: Option<Vec<f64>>,
    marketable: Option<Vec<bool>>,
}

impl TryFrom<RawPortfolio> for PortfolioSystem {
    type Error = Error;

    fn try_from(raw: RawPortfolio) -> Result<Self> {
        let mut s = PortfolioSystem::new(raw.q0, raw.p0, raw.equity)?;
        if let Some(l) = raw.lambda {
            s = s.with_target_leverage(l)?;
        }
        if let Some(l) = raw.lambda_max {
            s = s.with_leverage_cap(l)?;
        }
        if let Some(m) = raw.marketable {
            s = s.with_marketable(m)?;
        }
        Ok(s)
    }
}

impl PortfolioSystem {
    /// Target leverages default to the initial `A / E`; every asset is
    /// marketable and no leverage cap is set.
    pub fn new(q0: Matrix, p0: Vec<f64>, equity: Vec<f64>) -> Result<Self> {
        let m = p0.len();
        if equity.len() != q0.len() {
            return Err(Error::param(format!("{} equities for {} banks", equity.len(), q0.len())));
        }
        if let Some(p) = p0.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::param(format!("initial prices must be positive, got {p}")));
        }
        for (i, row) in q0.iter().enumerate() {
            if row.len() != m {
                return Err(Error::param(format!("holdings row {i} has {} entries for {m} assets", row.len())));
            }
            if row.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
                return Err(Error::param(format!("holdings of bank {i} must be non-negative")));
            }
        }
        let mut lambda = Vec::with_capacity(equity.len());
        for (i, (row, &e)) in q0.iter().zip(&equity).enumerate() {
            let a: f64 = row.iter().zip(&p0).map(|(q, p)| q * p).sum();
            if !(e.is_finite() && e >= 0.0) || e > a * (1.0 + 1e-12) {
                return Err(Error::param(format!(
                    "bank {i}: equity {e} must lie between 0 and its assets {a}"
                )));
            }
            lambda.push(if e > 0.0 { a / e } else { f64::INFINITY });
        }
        Ok(Self {
            marketable: vec![true; m],
            q0,
            p0,
            equity,
            lambda,
            lambda_max: None,
        })
    }

    /// Every bank invests a unit of value split evenly over the assets it is
    /// linked to, at unit prices, with equity `1 / leverage`. Banks without
    /// assets hold nothing. All target leverages equal `leverage`.
    pub fn from_bipartite(graph: &BipartiteGraph, leverage: f64) -> Result<Self> {
        if !(leverage.is_finite() && leverage >= 1.0) {
            return Err(Error::param(format!("leverage must be at least 1, got {leverage}")));
        }
        let deg = graph.bank_degrees();
        let mut q = vec![vec![0.0; graph.m_assets()]; graph.n_banks()];
        for &(b, a, _) in graph.holdings() {
            q[b][a] = 1.0 / deg[b] as f64;
        }
        let equity = deg.iter().map(|&d| if d > 0 { 1.0 / leverage } else { 0.0 }).collect();
        Self::new(q, vec![1.0; graph.m_assets()], equity)?.with_target_leverage(vec![leverage; graph.n_banks()])
    }

    pub fn with_target_leverage(mut self, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != self.n_banks() || lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::param("one positive target leverage per bank required"));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_leverage_cap(mut self, lambda_max: Vec<f64>) -> Result<Self> {
        if lambda_max.len() != self.n_banks() {
            return Err(Error::param("one leverage cap per bank required"));
        }
        self.lambda_max = Some(lambda_max);
        Ok(self)
    }

    pub fn with_marketable(mut self, marketable: Vec<bool>) -> Result<Self> {
        if marketable.len() != self.m_assets() {
            return Err(Error::param("one marketable flag per asset required"));
        }
        self.marketable = marketable;
        Ok(self)
    }

    pub fn n_banks(&self) -> usize {
        self.q0.len()
    }

    pub fn m_assets(&self) -> usize {
        self.p0.len()
    }

    pub fn holdings(&self) -> &Matrix {
        &self.q0
    }

    pub fn prices(&self) -> &[f64] {
        &self.p0
    }

    pub fn equities(&self) -> &[f64] {
        &self.equity
    }

    pub fn target_leverage(&self) -> &[f64] {
        &self.lambda
    }

    pub fn assets(&self) -> Vec<f64> {
        self.q0
            .iter()
            .map(|row| row.iter().zip(&self.p0).map(|(q, p)| q * p).sum())
            .collect()
    }

    pub fn liabilities(&self) -> Vec<f64> {
        self.assets().iter().zip(&self.equity).map(|(a, e)| a - e).collect()
    }

    /// Number of assets held by each bank.
    pub fn diversification(&self) -> Vec<usize> {
        self.q0.iter().map(|row| row.iter().filter(|q| **q > 0.0).count()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImpactFunction {
    /// `p = p_ref (1 - alpha l)`, floored at zero.
    Linear { alpha: f64 },
    /// `p = p_ref exp(-alpha l)`.
    LogLinear { alpha: f64 },
}

impl ImpactFunction {
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Linear { alpha } | Self::LogLinear { alpha } => alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        let a = self.alpha();
        if a.is_finite() && a >= 0.0 {
            Ok(())
        } else {
            Err(Error::param(format!("impact strength must be non-negative, got {a}")))
        }
    }

    /// Price multiplier after liquidating a fraction `l` of the float.
    pub fn factor(&self, l: f64) -> f64 {
        match *self {
            Self::Linear { alpha } => (1.0 - alpha * l).max(0.0),
            Self::LogLinear { alpha } => (-alpha * l).exp(),
        }
    }
}

/// Initial perturbation of a fire-sale run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shock {
    /// Reprice `asset` from `p0` to `(1 - xi) p0`.
    Asset { asset: usize, xi: f64 },
    /// Force `bank` into default in the first round.
    Bank { bank: usize },
}

impl FromStr for Shock {
    type Err = Error;

    /// `asset:<idx>:<xi>` or `bank:<idx>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parse(format!("bad shock `{s}`; expected asset:<idx>:<xi> or bank:<idx>"));
        match parts.as_slice() {
            ["asset", a, xi] => Ok(Shock::Asset {
                asset: a.parse().map_err(|_| bad())?,
                xi: xi.parse().map_err(|_| bad())?,
            }),
            ["bank", b] => Ok(Shock::Bank {
                bank: b.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Shock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shock::Asset { asset, xi } => write!(f, "asset:{asset}:{xi}"),
            Shock::Bank { bank } => write!(f, "bank:{bank}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSaleOutcome {
    pub defaulted: Vec<usize>,
    /// Banks that breached their leverage cap without enough marketable
    /// assets to restore the target. They are also listed in `defaulted`.
    pub constrained: Vec<usize>,
    pub rounds: usize,
    pub prices: Vec<f64>,
    /// Prices before round 1 (after the shock) and after every round.
    pub price_history: Vec<Vec<f64>>,
    /// Shares of each asset sold in each round.
    pub liquidated_shares: Vec<Vec<f64>>,
    /// Final equities; a defaulted bank keeps the value it had when it failed.
    pub equities: Vec<f64>,
    pub total_equity_loss: f64,
    pub default_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Policy {
    Threshold,
    Target { gamma: f64 },
    Buffered,
}

/// Rounds after which a run that still trades is declared divergent.
pub const MAX_ROUNDS: usize = 100_000;

struct Holding {
    asset: usize,
    shares: f64,
}

/// Sale needed to bring leverage `assets / equity` back to `target` by
/// selling at current prices and repaying debt: `assets - target * equity`.
/// `None` when the marketable book is too small to cover it.
pub fn deleverage_to_target(assets: f64, equity: f64, target: f64, marketable_value: f64) -> Option<f64> {
    let sale = (assets - target * equity).max(0.0);
    if sale <= marketable_value * (1.0 + 1e-12) {
        Some(sale.min(marketable_value))
    } else {
        None
    }
}

fn run(system: &PortfolioSystem, impact: ImpactFunction, shock: Shock, policy: Policy) -> Result<FireSaleOutcome> {
    impact.validate()?;
    let (n, m) = (system.n_banks(), system.m_assets());
    let mut p_ref = system.p0.clone();
    let mut forced = None;
    match shock {
        Shock::Asset { asset, xi } => {
            if asset >= m {
                return Err(Error::param(format!("asset {asset} out of range")));
            }
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::param(format!("xi must lie in [0, 1], got {xi}")));
            }
            p_ref[asset] *= 1.0 - xi;
        }
        Shock::Bank { bank } => {
            if bank >= n {
                return Err(Error::param(format!("bank {bank} out of range")));
            }
            forced = Some(bank);
        }
    }
    if policy == Policy::Buffered {
        let caps = system
            .lambda_max
            .as_ref()
            .ok_or_else(|| Error::param("buffered deleveraging needs leverage caps"))?;
        if let Some(i) = (0..n).find(|&i| !(caps[i] > system.lambda[i])) {
            return Err(Error::param(format!(
                "bank {i}: leverage cap {} must exceed target {}",
                caps[i], system.lambda[i]
            )));
        }
    }

    let mut book: Vec<Vec<Holding>> = system
        .q0
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, q)| **q > 0.0)
                .map(|(asset, &shares)| Holding { asset, shares })
                .collect()
        })
        .collect();
    let float: Vec<f64> = (0..m).map(|a| system.q0.iter().map(|r| r[a]).sum()).collect();
    let initial_assets = system.assets();
    let total_initial: f64 = initial_assets.iter().sum();
    let mut debt = system.liabilities();
    let mut sold_total = vec![0.0; m];
    let mut prices = p_ref.clone();
    let mut alive = vec![true; n];
    let mut equity_at_default = vec![0.0; n];
    let mut constrained = Vec::new();
    let mut price_history = vec![prices.clone()];
    let mut liquidated_shares = Vec::new();

    let marked = |book: &[Holding], prices: &[f64]| -> f64 { book.iter().map(|h| h.shares * prices[h.asset]).sum() };

    let mut rounds = 0;
    loop {
        if rounds >= MAX_ROUNDS {
            return Err(Error::Convergence {
                iterations: rounds,
                residual: liquidated_shares.last().map_or(0.0, |v: &Vec<f64>| v.iter().sum()),
            });
        }
        let mut sales = vec![0.0; m];
        let mut sale_value = 0.0;
        let mut failing = Vec::new();
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let a = marked(&book[i], &prices);
            let e = a - debt[i];
            let forced_now = rounds == 0 && forced == Some(i);
            if e < 0.0 || forced_now {
                failing.push((i, e));
                for h in &book[i] {
                    if policy != Policy::Buffered || system.marketable[h.asset] {
                        sales[h.asset] += h.shares;
                        sale_value += h.shares * prices[h.asset];
                    }
                }
                continue;
            }
            // Fraction of each eligible holding to sell.
            let fraction = match policy {
                Policy::Threshold => 0.0,
                Policy::Target { gamma } => {
                    let target = system.lambda[i] * e;
                    if a > target {
                        let delta = gamma * (a - target);
                        let k = book[i].iter().filter(|h| h.shares > 0.0).count();
                        for h in book[i].iter_mut().filter(|h| h.shares > 0.0) {
                            let want = if prices[h.asset] > 0.0 {
                                delta / (k as f64 * prices[h.asset])
                            } else {
                                h.shares
                            };
                            let s = want.min(h.shares);
                            sales[h.asset] += s;
                            sale_value += s * prices[h.asset];
                        }
                    }
                    0.0
                }
                Policy::Buffered => {
                    let cap = system.lambda_max.as_ref().expect("checked above")[i];
                    if a > cap * e {
                        let liquid: f64 = book[i]
                            .iter()
                            .filter(|h| system.marketable[h.asset])
                            .map(|h| h.shares * prices[h.asset])
                            .sum();
                        match deleverage_to_target(a, e, system.lambda[i], liquid) {
                            Some(s) if liquid > 0.0 => s / liquid,
                            Some(_) => 0.0,
                            None => {
                                failing.push((i, e));
                                constrained.push(i);
                                1.0
                            }
                        }
                    } else {
                        0.0
                    }
                }
            };
            if fraction > 0.0 {
                for h in book[i].iter().filter(|h| system.marketable[h.asset]) {
                    let s = fraction * h.shares;
                    sales[h.asset] += s;
                    sale_value += s * prices[h.asset];
                }
            }
        }

        if failing.is_empty() && sale_value < 1e-9 * total_initial {
            break;
        }
        rounds += 1;

        // Execute at beginning-of-round prices.
        let is_failing: Vec<bool> = {
            let mut f = vec![false; n];
            for &(i, _) in &failing {
                f[i] = true;
            }
            f
        };
        for &(i, e) in &failing {
            alive[i] = false;
            equity_at_default[i] = e;
        }
        let mut executed = vec![0.0; m];
        for i in 0..n {
            let e_before = marked(&book[i], &prices) - debt[i];
            let mut proceeds = 0.0;
            let fraction = match policy {
                Policy::Buffered if alive[i] => {
                    let cap = system.lambda_max.as_ref().expect("checked above")[i];
                    let a = marked(&book[i], &prices);
                    if a > cap * e_before {
                        let liquid: f64 = book[i]
                            .iter()
                            .filter(|h| system.marketable[h.asset])
                            .map(|h| h.shares * prices[h.asset])
                            .sum();
                        deleverage_to_target(a, e_before, system.lambda[i], liquid)
                            .filter(|_| liquid > 0.0)
                            .map_or(0.0, |s| s / liquid)
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            let target_delta = match policy {
                Policy::Target { gamma } if alive[i] => {
                    let a = marked(&book[i], &prices);
                    let target = system.lambda[i] * e_before;
                    (a > target).then_some(gamma * (a - target))
                }
                _ => None,
            };
            let k = book[i].iter().filter(|h| h.shares > 0.0).count();
            for h in book[i].iter_mut() {
                let s = if is_failing[i] {
                    if policy != Policy::Buffered || system.marketable[h.asset] {
                        h.shares
                    } else {
                        0.0
                    }
                } else if let Some(delta) = target_delta {
                    if h.shares > 0.0 {
                        if prices[h.asset] > 0.0 {
                            (delta / (k as f64 * prices[h.asset])).min(h.shares)
                        } else {
                            h.shares
                        }
                    } else {
                        0.0
                    }
                } else if fraction > 0.0 && system.marketable[h.asset] {
                    fraction * h.shares
                } else {
                    0.0
                };
                if s > 0.0 {
                    h.shares -= s;
                    executed[h.asset] += s;
                    proceeds += s * prices[h.asset];
                }
            }
            if alive[i] {
                debt[i] -= proceeds;
            }
        }
        debug_assert!(executed.iter().zip(&sales).all(|(x, y)| (x - y).abs() <= 1e-9 * y.max(1.0)));
        for a in 0..m {
            if executed[a] > 0.0 {
                sold_total[a] = (sold_total[a] + executed[a]).min(float[a]);
                let l = sold_total[a] / float[a];
                prices[a] = p_ref[a] * impact.factor(l);
            }
        }
        price_history.push(prices.clone());
        liquidated_shares.push(executed);
    }

    let equities: Vec<f64> = (0..n)
        .map(|i| {
            if alive[i] {
                marked(&book[i], &prices) - debt[i]
            } else {
                equity_at_default[i]
            }
        })
        .collect();
    let defaulted: Vec<usize> = (0..n).filter(|&i| !alive[i]).collect();
    constrained.sort_unstable();
    Ok(FireSaleOutcome {
        default_fraction: if n == 0 { 0.0 } else { defaulted.len() as f64 / n as f64 },
        total_equity_loss: system.equity.iter().zip(&equities).map(|(e0, e)| e0 - e).sum(),
        defaulted,
        constrained,
        rounds,
        prices,
        price_history,
        liquidated_shares,
        equities,
    })
}

/// Banks are passive until their equity turns negative, then sell their
/// whole portfolio.
pub fn simulate_threshold_firesale(system: &PortfolioSystem, impact: ImpactFunction, shock: Shock) -> Result<FireSaleOutcome> {
    run(system, impact, shock, Policy::Threshold)
}

/// Solvent banks above their target leverage sell `gamma (A - lambda E)`
/// each round, split evenly in value across the assets they hold.
pub fn simulate_leverage_targeting(
    system: &PortfolioSystem,
    impact: ImpactFunction,
    shock: Shock,
    gamma: f64,
) -> Result<FireSaleOutcome> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::param(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if system.lambda.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::param("target leverages must be positive"));
    }
    run(system, impact, shock, Policy::Target { gamma })
}

/// Banks sit still until leverage exceeds their cap, then sell marketable
/// assets pro rata back to the target. A bank whose marketable book cannot
/// cover the sale is a constrained default.
pub fn simulate_buffered_deleveraging(system: &PortfolioSystem, impact: ImpactFunction, shock: Shock) -> Result<FireSaleOutcome> {
    run(system, impact, shock, Policy::Buffered)
}

/// Indicator `Pi[i][j] = 1` when the full liquidation of bank `j` alone,
/// under log-linear impact `alpha`, costs bank `i` more than its equity.
/// Returns the matrix and its spectral radius.
pub fn transfer_matrix(system: &PortfolioSystem, alpha: f64) -> Result<(Matrix, f64)> {
    ImpactFunction::LogLinear { alpha }.validate()?;
    let (n, m) = (system.n_banks(), system.m_assets());
    let q = &system.q0;
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut float = vec![0.0; m];
    for (i, row) in q.iter().enumerate() {
        for (a, &s) in row.iter().enumerate() {
            if s > 0.0 {
                holders[a].push(i);
                float[a] += s;
            }
        }
    }
    let mut loss = vec![vec![0.0; n]; n];
    for a in 0..m {
        for &j in &holders[a] {
            let devaluation = -(-alpha * q[j][a] / float[a]).exp_m1();
            for &i in &holders[a] {
                if i != j {
                    loss[i][j] += q[i][a] * system.p0[a] * devaluation;
                }
            }
        }
    }
    let pi: Matrix = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i != j && loss[i][j] > system.equity[i]))).collect())
        .collect();
    let radius = spectral_radius_nonneg(&pi, PowerIterationOptions::default())?;
    Ok((pi, radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(equity: f64) -> PortfolioSystem {
        PortfolioSystem::new(vec![vec![10.0]], vec![1.0], vec![equity]).unwrap()
    }

    #[test]
    fn single_bank_default_linear() {
        let out = simulate_threshold_firesale(&single(1.0), ImpactFunction::Linear { alpha: 0.5 }, Shock::Asset { asset: 0, xi: 0.2 }).unwrap();
        assert_eq!(out.defaulted, vec![0]);
        assert_eq!(out.rounds, 1);
        assert!((out.prices[0] - 0.8 * 0.5).abs() < 1e-15);
        assert!((out.equities[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_impact_no_contagion() {
        let s = PortfolioSystem::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 1.0], vec![0.1, 1.0]).unwrap();
        let out = simulate_threshold_firesale(&s, ImpactFunction::LogLinear { alpha: 0.0 }, Shock::Asset { asset: 0, xi: 0.5 }).unwrap();
        assert_eq!(out.defaulted, vec![0]);
        assert_eq!(out.prices, vec![0.5, 1.0]);
    }

    #[test]
    fn two_bank_loglinear_cascade() {
        // Both hold one share of asset 0; bank 1 also holds asset 1.
        let s = PortfolioSystem::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 1.0], vec![0.1, 0.4]).unwrap();
        let out = simulate_threshold_firesale(&s, ImpactFunction::LogLinear { alpha: 1.0 }, Shock::Asset { asset: 0, xi: 0.2 }).unwrap();
        // Round 1: bank 0 loses 0.2 > 0.1 and dumps its share, l = 1/2.
        // Round 2: price 0.8 e^{-1/2} = 0.485, bank 1 loses 0.515 > 0.4.
        assert_eq!(out.defaulted, vec![0, 1]);
        assert_eq!(out.rounds, 2);
        assert!((out.price_history[1][0] - 0.8 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((out.prices[0] - 0.8 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((out.prices[1] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn at_target_no_trading() {
        let s = single(2.0);
        let out = simulate_leverage_targeting(&s, ImpactFunction::Linear { alpha: 1.0 }, Shock::Asset { asset: 0, xi: 0.0 }, 1.0).unwrap();
        assert_eq!(out.rounds, 0);
        assert!(out.liquidated_shares.is_empty());
    }

    #[test]
    fn zero_gamma_matches_threshold() {
        let s = PortfolioSystem::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 1.0], vec![0.1, 0.4]).unwrap();
        let impact = ImpactFunction::LogLinear { alpha: 1.0 };
        let shock = Shock::Asset { asset: 0, xi: 0.2 };
        let a = simulate_threshold_firesale(&s, impact, shock).unwrap();
        let b = simulate_leverage_targeting(&s, impact, shock, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_bank_spiral_matches_maps() {
        // One bank, one asset, 10 shares at price 1, equity 2: lambda = 5.
        let (alpha, xi, gamma) = (0.05, 0.01, 1.0);
        let s = single(2.0);
        let out = simulate_leverage_targeting(&s, ImpactFunction::LogLinear { alpha }, Shock::Asset { asset: 0, xi }, gamma).unwrap();
        let (mut q, mut debt, mut sold, mut p) = (10.0, 8.0, 0.0, 1.0 - xi);
        let mut expected = vec![p];
        for _ in 0..out.rounds {
            let a = q * p;
            let e = a - debt;
            let delta = gamma * (a - 5.0 * e);
            let s = (delta / p).min(q);
            q -= s;
            debt -= s * p;
            sold += s;
            p = (1.0 - xi) * (-alpha * sold / 10.0).exp();
            expected.push(p);
        }
        assert!(out.rounds > 3);
        assert!(out.defaulted.is_empty());
        for (x, y) in out.price_history.iter().zip(&expected) {
            assert!((x[0] - y).abs() < 1e-14);
        }
    }

    #[test]
    fn buffer_absorbs_small_loss() {
        let s = single(2.0).with_leverage_cap(vec![8.0]).unwrap();
        let out = simulate_buffered_deleveraging(&s, ImpactFunction::Linear { alpha: 1.0 }, Shock::Asset { asset: 0, xi: 0.05 }).unwrap();
        assert_eq!(out.rounds, 0);
    }

    #[test]
    fn illiquid_breach_is_constrained() {
        let s = single(2.0)
            .with_leverage_cap(vec![6.0])
            .unwrap()
            .with_marketable(vec![false])
            .unwrap();
        let out = simulate_buffered_deleveraging(&s, ImpactFunction::Linear { alpha: 1.0 }, Shock::Asset { asset: 0, xi: 0.1 }).unwrap();
        assert_eq!(out.constrained, vec![0]);
        assert_eq!(out.defaulted, vec![0]);
        assert_eq!(out.prices, vec![0.9]);
    }

    #[test]
    fn buffered_sale_restores_target() {
        // Marketable asset 0 and illiquid asset 1; shock to the illiquid one.
        let s = PortfolioSystem::new(vec![vec![5.0, 5.0]], vec![1.0, 1.0], vec![2.0])
            .unwrap()
            .with_leverage_cap(vec![6.0])
            .unwrap()
            .with_marketable(vec![true, false])
            .unwrap();
        let out = simulate_buffered_deleveraging(&s, ImpactFunction::Linear { alpha: 0.0 }, Shock::Asset { asset: 1, xi: 0.1 }).unwrap();
        // A = 9.5, E = 1.5: leverage 6.33 > 6. Sell 9.5 - 5 * 1.5 = 2 of asset 0.
        assert_eq!(out.rounds, 1);
        assert!((out.liquidated_shares[0][0] - 2.0).abs() < 1e-12);
        assert_eq!(out.liquidated_shares[0][1], 0.0);
        let a = 3.0 + 4.5;
        assert!((a / out.equities[0] - 5.0).abs() < 1e-8);
        assert_eq!(deleverage_to_target(9.5, 1.5, 5.0, 1.0), None);
    }

    #[test]
    fn cap_below_target_rejected() {
        let s = single(2.0).with_leverage_cap(vec![4.0]).unwrap();
        assert!(simulate_buffered_deleveraging(&s, ImpactFunction::Linear { alpha: 1.0 }, Shock::Asset { asset: 0, xi: 0.1 }).is_err());
    }

    #[test]
    fn transfer_matrix_cases() {
        let s = PortfolioSystem::new(vec![vec![1.0], vec![1.0]], vec![1.0], vec![0.3, 0.5]).unwrap();
        let (pi, r) = transfer_matrix(&s, 0.0).unwrap();
        assert_eq!(pi, vec![vec![0.0; 2]; 2]);
        assert_eq!(r, 0.0);
        // Loss from the other's sale: 1 - e^{-1/2} = 0.393.
        let (pi, r) = transfer_matrix(&s, 1.0).unwrap();
        assert_eq!(pi, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(r, 0.0);
        let (_, r) = transfer_matrix(&s, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shock_parsing() {
        assert_eq!("asset:3:0.25".parse::<Shock>().unwrap(), Shock::Asset { asset: 3, xi: 0.25 });
        assert_eq!("bank:2".parse::<Shock>().unwrap(), Shock::Bank { bank: 2 });
        assert!("asset:x".parse::<Shock>().is_err());
        assert!(simulate_threshold_firesale(&single(1.0), ImpactFunction::Linear { alpha: 0.5 }, Shock::Asset { asset: 0, xi: 1.2 }).is_err());
    }

    #[test]
    fn bank_failure_shock() {
        let s = PortfolioSystem::new(vec![vec![1.0], vec![1.0]], vec![1.0], vec![0.3, 0.5]).unwrap();
        let out = simulate_threshold_firesale(&s, ImpactFunction::LogLinear { alpha: 1.0 }, Shock::Bank { bank: 1 }).unwrap();
        assert_eq!(out.defaulted, vec![0, 1]);
    }

    #[test]
    fn from_bipartite_calibration() {
        let g = BipartiteGraph::new(3, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let s = PortfolioSystem::from_bipartite(&g, 10.0).unwrap();
        assert_eq!(s.assets(), vec![1.0, 1.0, 0.0]);
        assert_eq!(s.equities(), &[0.1, 0.1, 0.0]);
        assert_eq!(s.diversification(), vec![2, 1, 0]);
        assert!((s.target_leverage()[0] - 10.0).abs() < 1e-12);
    }
}
