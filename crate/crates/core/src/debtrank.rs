//! DebtRank distress propagation.
//!
//! `h_i(t)` is the relative equity loss of bank `i`. Losses travel from
//! borrowers to lenders through the leverage matrix `Lambda_ij = W_ij / E_i(0)`,
//! where `W_ij` is the exposure of `i` to `j`. `h(0) = 0` and `h(1)` is the
//! exogenous shock.

use serde::{Deserialize, Serialize};

use crate::linalg::{check_square, spectral_radius_nonneg, Matrix, PowerIterationOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExposures")]
pub struct ExposureSystem {
    #[serde(rename = "W")]
    w: Matrix,
    #[serde(rename = "E0")]
    e0: Vec<f64>,
}

#[derive(Deserialize)]
struct RawExposures {
    #[serde(rename = "W")]
    w: Matrix,
    #[serde(rename = "E0", alias = "e")]
    e0: Vec<f64>,
}

impl TryFrom<RawExposures> for ExposureSystem {
    type Error = Error;

    fn try_from(raw: RawExposures) -> Result<Self> {
        ExposureSystem::new(raw.w, raw.e0)
    }
}

impl ExposureSystem {
    pub fn new(w: Matrix, e0: Vec<f64>) -> Result<Self> {
        let n = check_square(&w, "exposure matrix")?;
        if e0.len() != n {
            return Err(Error::param(format!("{} equities for {n} banks", e0.len())));
        }
        for (i, row) in w.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !(x.is_finite() && x >= 0.0) || (i == j && x != 0.0) {
                    return Err(Error::param(format!("W[{i}][{j}] = {x} is not a valid exposure")));
                }
            }
        }
        if let Some((i, e)) = e0.iter().enumerate().find(|(_, e)| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::param(format!("equity of bank {i} must be positive, got {e}")));
        }
        Ok(Self { w, e0 })
    }

    /// Builds the system whose leverage matrix is exactly `lambda`, with unit
    /// equities.
    pub fn from_leverage(lambda: Matrix) -> Result<Self> {
        let n = lambda.len();
        Self::new(lambda, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.e0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e0.is_empty()
    }

    pub fn exposures(&self) -> &Matrix {
        &self.w
    }

    pub fn equities(&self) -> &[f64] {
        &self.e0
    }

    pub fn leverage(&self) -> Matrix {
        self.w
            .iter()
            .zip(&self.e0)
            .map(|(row, e)| row.iter().map(|x| x / e).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistressTrajectory {
    /// `h[t][i]` for `t = 0, 1, ..., steps + 1`.
    pub h: Vec<Vec<f64>>,
    /// Banks propagating in each update; empty for the iterated variants.
    pub active_sets: Vec<Vec<usize>>,
    /// Number of updates applied after the shock.
    pub steps: usize,
    pub defaulted: Vec<usize>,
    pub converged: bool,
}

impl DistressTrajectory {
    pub fn final_h(&self) -> &[f64] {
        self.h.last().expect("trajectory holds h(0) and h(1)")
    }

    fn new(h: Vec<Vec<f64>>, active_sets: Vec<Vec<usize>>, converged: bool) -> Self {
        let last = h.last().expect("nonempty");
        let defaulted = (0..last.len()).filter(|&i| last[i] >= 1.0).collect();
        Self {
            steps: h.len() - 2,
            h,
            active_sets,
            defaulted,
            converged,
        }
    }
}

/// How the active set of the original dynamic advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveRule {
    /// A bank propagates in exactly the one update after its first positive
    /// distress.
    #[default]
    PropagateOnce,
    /// `A(t+1) = {i : h_i(t) > 0, h_i(t-1) = 0}` read with literal indices,
    /// which lets a bank propagate in two consecutive updates.
    LiteralIndex,
}

/// Sparse rows of the leverage matrix.
struct Rows(Vec<Vec<(usize, f64)>>);

impl Rows {
    fn new(system: &ExposureSystem) -> Self {
        Rows(
            system
                .leverage()
                .into_iter()
                .map(|row| row.into_iter().enumerate().filter(|(_, x)| *x > 0.0).collect())
                .collect(),
        )
    }
}

fn check_shock(system: &ExposureSystem, shock: &[f64]) -> Result<()> {
    if shock.len() != system.len() {
        return Err(Error::param(format!("shock has {} entries for {} banks", shock.len(), system.len())));
    }
    if let Some(s) = shock.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::param(format!("shock entries must lie in [0, 1], got {s}")));
    }
    Ok(())
}

pub fn debtrank_original(system: &ExposureSystem, shock: &[f64]) -> Result<DistressTrajectory> {
    debtrank_original_with(system, shock, ActiveRule::PropagateOnce)
}

pub fn debtrank_original_with(system: &ExposureSystem, shock: &[f64], rule: ActiveRule) -> Result<DistressTrajectory> {
    check_shock(system, shock)?;
    let n = system.len();
    let rows = Rows::new(system);
    let mut h = vec![vec![0.0; n], shock.to_vec()];
    let mut active: Vec<usize> = (0..n).filter(|&i| shock[i] > 0.0).collect();
    let mut active_sets = Vec::new();
    let mut is_active = vec![false; n];
    while !active.is_empty() {
        for &j in &active {
            is_active[j] = true;
        }
        let cur = &h[h.len() - 1];
        let next: Vec<f64> = rows
            .0
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let inflow: f64 = row.iter().filter(|(j, _)| is_active[*j]).map(|&(j, x)| x * cur[j]).sum();
                (cur[i] + inflow).min(1.0)
            })
            .collect();
        for &j in &active {
            is_active[j] = false;
        }
        let t = h.len() - 1;
        let newly = match rule {
            ActiveRule::PropagateOnce => (0..n).filter(|&i| next[i] > 0.0 && h[t][i] == 0.0).collect(),
            ActiveRule::LiteralIndex => (0..n).filter(|&i| h[t][i] > 0.0 && h[t - 1][i] == 0.0).collect(),
        };
        active_sets.push(std::mem::replace(&mut active, newly));
        h.push(next);
    }
    Ok(DistressTrajectory::new(h, active_sets, true))
}

#[derive(Debug, Clone, Copy)]
pub struct IterationOptions {
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_steps: 100_000,
        }
    }
}

fn iterate(
    system: &ExposureSystem,
    shock: &[f64],
    opts: IterationOptions,
    f: impl Fn(f64) -> f64,
) -> Result<DistressTrajectory> {
    check_shock(system, shock)?;
    let n = system.len();
    let rows = Rows::new(system);
    let mut h = vec![vec![0.0; n], shock.to_vec()];
    for _ in 0..opts.max_steps {
        let cur = &h[h.len() - 1];
        let fx: Vec<f64> = cur.iter().map(|&x| f(x)).collect();
        let next: Vec<f64> = rows
            .0
            .iter()
            .enumerate()
            .map(|(i, row)| (shock[i] + row.iter().map(|&(j, x)| x * fx[j]).sum::<f64>()).min(1.0))
            .collect();
        let change = next.iter().zip(cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h.push(next);
        if change <= opts.tolerance {
            return Ok(DistressTrajectory::new(h, Vec::new(), true));
        }
    }
    Ok(DistressTrajectory::new(h, Vec::new(), false))
}

/// `h(t+1) = min(1, h(1) + Lambda h(t))` to a fixed point.
pub fn debtrank_iterated(system: &ExposureSystem, shock: &[f64]) -> Result<DistressTrajectory> {
    debtrank_iterated_with(system, shock, IterationOptions::default())
}

pub fn debtrank_iterated_with(system: &ExposureSystem, shock: &[f64], opts: IterationOptions) -> Result<DistressTrajectory> {
    iterate(system, shock, opts, |x| x)
}

/// Propagation rule `f(x) = x exp(alpha (x - 1))`: linear at `alpha = 0`,
/// a default threshold as `alpha -> inf`.
pub fn distress_transfer(x: f64, alpha: f64) -> f64 {
    x * (alpha * (x - 1.0)).exp()
}

/// `h(t+1) = min(1, h(1) + Lambda f(h(t)))` with [`distress_transfer`].
pub fn debtrank_nonlinear(system: &ExposureSystem, shock: &[f64], alpha: f64) -> Result<DistressTrajectory> {
    debtrank_nonlinear_with(system, shock, alpha, IterationOptions::default())
}

pub fn debtrank_nonlinear_with(
    system: &ExposureSystem,
    shock: &[f64],
    alpha: f64,
    opts: IterationOptions,
) -> Result<DistressTrajectory> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::param(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    iterate(system, shock, opts, |x| distress_transfer(x, alpha))
}

/// Largest eigenvalue of the leverage matrix.
pub fn leverage_spectral_radius(system: &ExposureSystem) -> Result<f64> {
    spectral_radius_nonneg(&system.leverage(), PowerIterationOptions::default())
}
