//! Clearing payment vectors.
//!
//! A [`FinancialSystem`] is a nominal liabilities matrix `L` (`L[i][j]` is
//! what `i` owes `j`) and a vector `e` of external cash flows. A clearing
//! vector `p` solves `p_i = min(e_i + sum_j pi_ji p_j, pbar_i)`, where
//! `pbar` holds the row sums of `L` and `pi` its row-normalised form.
//!
//! [`clear_eisenberg_noe`] iterates that map downward from `pbar`, which
//! converges to the greatest clearing vector. [`clear_rogers_veraart`] adds
//! default costs: an insolvent bank only passes on `alpha` of its external
//! and `beta` of its interbank assets.

use serde::{Deserialize, Serialize};

use crate::linalg::{check_square, solve_dense, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem")]
pub struct FinancialSystem {
    #[serde(rename = "L")]
    liabilities: Matrix,
    e: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSystem {
    #[serde(rename = "L")]
    liabilities: Matrix,
    e: Vec<f64>,
}

impl TryFrom<RawSystem> for FinancialSystem {
    type Error = Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        FinancialSystem::new(raw.liabilities, raw.e)
    }
}

impl FinancialSystem {
    pub fn new(liabilities: Matrix, e: Vec<f64>) -> Result<Self> {
        let n = check_square(&liabilities, "liabilities matrix")?;
        if e.len() != n {
            return Err(Error::param(format!(
                "external cash flow has {} entries for {n} banks",
                e.len()
            )));
        }
        for (i, row) in liabilities.iter().enumerate() {
            for (j, &l) in row.iter().enumerate() {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(Error::param(format!("L[{i}][{j}] = {l} is not a non-negative amount")));
                }
                if i == j && l != 0.0 {
                    return Err(Error::param(format!("bank {i} owes itself {l}")));
                }
            }
        }
        if let Some((i, v)) = e.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!(
                "e[{i}] = {v}: external liabilities belong on a sink node"
            )));
        }
        Ok(Self { liabilities, e })
    }

    /// Prepends a sink node 0 that receives `external_liabilities[i]` from
    /// bank `i`. The sink has no cash and owes nothing, so it never defaults.
    /// Bank `i` of the input becomes node `i + 1`.
    pub fn with_external_sink(liabilities: Matrix, e: Vec<f64>, external_liabilities: &[f64]) -> Result<Self> {
        let n = liabilities.len();
        if external_liabilities.len() != n {
            return Err(Error::param("one external liability per bank required"));
        }
        let mut l = Vec::with_capacity(n + 1);
        l.push(vec![0.0; n + 1]);
        for (row, &ext) in liabilities.into_iter().zip(external_liabilities) {
            let mut r = Vec::with_capacity(n + 1);
            r.push(ext);
            r.extend(row);
            l.push(r);
        }
        let mut cash = Vec::with_capacity(n + 1);
        cash.push(0.0);
        cash.extend(e);
        Self::new(l, cash)
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn liabilities(&self) -> &Matrix {
        &self.liabilities
    }

    pub fn external(&self) -> &[f64] {
        &self.e
    }
}

pub fn total_obligations(system: &FinancialSystem) -> Vec<f64> {
    system.liabilities.iter().map(|r| r.iter().sum()).collect()
}

pub fn relative_liabilities(system: &FinancialSystem) -> Matrix {
    system
        .liabilities
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|l| l / s).collect()
            } else {
                vec![0.0; row.len()]
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub p: Vec<f64>,
    pub p_bar: Vec<f64>,
    pub defaults: Vec<usize>,
    pub net_positions: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm distance between the downward and upward limits, when the
    /// upward iteration was run. Above tolerance means several clearing
    /// vectors exist and `p` is the greatest.
    pub uniqueness_gap: Option<f64>,
    pub unique: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClearingOptions {
    /// Relative stopping tolerance, scaled by `max(1, max pbar)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Also iterate upward from zero to detect multiple fixed points.
    pub check_uniqueness: bool,
}

impl Default for ClearingOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            check_uniqueness: true,
        }
    }
}

/// Sparse transpose of the relative liabilities: for each creditor `i`, the
/// list of `(debtor j, pi_ji)`.
struct Inflows {
    by_creditor: Vec<Vec<(usize, f64)>>,
}

impl Inflows {
    fn new(pi: &Matrix) -> Self {
        let n = pi.len();
        let mut by_creditor = vec![Vec::new(); n];
        for (j, row) in pi.iter().enumerate() {
            for (i, &x) in row.iter().enumerate() {
                if x > 0.0 {
                    by_creditor[i].push((j, x));
                }
            }
        }
        Self { by_creditor }
    }

    fn received(&self, i: usize, p: &[f64]) -> f64 {
        self.by_creditor[i].iter().map(|&(j, x)| x * p[j]).sum()
    }
}

/// Iterates `p <- update(i, e_i, inflow_i)` from `start` to a fixed point.
fn fixed_point(
    inflows: &Inflows,
    e: &[f64],
    start: Vec<f64>,
    tol: f64,
    max_iterations: usize,
    update: impl Fn(usize, f64, f64) -> f64,
) -> Result<(Vec<f64>, usize)> {
    let mut p = start;
    let mut next = vec![0.0; p.len()];
    let mut change = f64::INFINITY;
    for it in 1..=max_iterations {
        change = 0.0;
        for i in 0..p.len() {
            next[i] = update(i, e[i], inflows.received(i, &p));
            change = change.max((next[i] - p[i]).abs());
        }
        std::mem::swap(&mut p, &mut next);
        if change <= tol {
            return Ok((p, it));
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        residual: change,
    })
}

fn finish(
    system: &FinancialSystem,
    inflows: &Inflows,
    p_bar: Vec<f64>,
    p: Vec<f64>,
    iterations: usize,
    upward: Option<Vec<f64>>,
    tol: f64,
) -> ClearingResult {
    let defaults = p
        .iter()
        .zip(&p_bar)
        .enumerate()
        .filter(|(_, (pi, pb))| **pi < **pb - 1e-9 * pb.max(1.0))
        .map(|(i, _)| i)
        .collect();
    let net_positions = (0..p.len())
        .map(|i| system.e[i] + inflows.received(i, &p) - p[i])
        .collect();
    let uniqueness_gap = upward.map(|lo| {
        p.iter()
            .zip(&lo)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    ClearingResult {
        unique: uniqueness_gap.map(|g| g <= tol),
        p,
        p_bar,
        defaults,
        net_positions,
        iterations,
        uniqueness_gap,
    }
}

/// Exact fixed point on the default set of an iterate `p`: defaulted banks
/// pay `alpha e_i + beta inflow_i`, the others pay in full. Returned only if
/// the update map reproduces it, which fails when `p` has not yet settled on
/// its final default set.
fn polish(
    pi: &Matrix,
    inflows: &Inflows,
    e: &[f64],
    p_bar: &[f64],
    p: &[f64],
    (alpha, beta): (f64, f64),
    step: impl Fn(usize, f64, f64) -> f64,
) -> Option<Vec<f64>> {
    let n = p.len();
    let d: Vec<usize> = (0..n).filter(|&i| p[i] < p_bar[i]).collect();
    if d.is_empty() {
        return Some(p.to_vec());
    }
    let a: Matrix = d
        .iter()
        .map(|&i| d.iter().map(|&j| f64::from(i == j) - beta * pi[j][i]).collect())
        .collect();
    let b: Vec<f64> = d
        .iter()
        .map(|&i| {
            alpha * e[i]
                + beta
                    * (0..n)
                        .filter(|&j| p[j] >= p_bar[j])
                        .map(|j| pi[j][i] * p_bar[j])
                        .sum::<f64>()
        })
        .collect();
    let x = solve_dense(&a, &b).ok()?;
    let mut exact = p_bar.to_vec();
    for (&i, v) in d.iter().zip(x) {
        exact[i] = v;
    }
    let scale = p_bar.iter().copied().fold(1.0, f64::max);
    let settled = (0..n).all(|i| {
        let again = step(i, e[i], inflows.received(i, &exact));
        (0.0..=p_bar[i]).contains(&exact[i]) && (again - exact[i]).abs() <= 1e-12 * scale
    });
    settled.then_some(exact)
}

/// Iterates from `start` until the increments fall below `tol`, then solves
/// exactly on the default set reached. Small increments alone do not bound
/// the distance to the fixed point when the contraction is slow, so a failed
/// polish tightens the tolerance and resumes.
#[allow(clippy::too_many_arguments)]
fn monotone_limit(
    pi: &Matrix,
    inflows: &Inflows,
    e: &[f64],
    p_bar: &[f64],
    start: Vec<f64>,
    tol: f64,
    max_iterations: usize,
    linear: (f64, f64),
    step: impl Fn(usize, f64, f64) -> f64 + Copy,
) -> Result<(Vec<f64>, usize)> {
    let (mut p, mut iterations) = fixed_point(inflows, e, start, tol, max_iterations, step)?;
    let mut t = tol;
    loop {
        if let Some(exact) = polish(pi, inflows, e, p_bar, &p, linear, step) {
            return Ok((exact, iterations));
        }
        t *= 1e-2;
        if t < 1e-15 * tol.max(1.0) || iterations >= max_iterations {
            return Ok((p, iterations));
        }
        let (q, more) = fixed_point(inflows, e, p, t, max_iterations - iterations, step)?;
        p = q;
        iterations += more;
    }
}

/// `linear = (alpha, beta)`: a defaulted bank pays `alpha e + beta inflow`,
/// which `update` must agree with below full payment.
fn clear_with(
    system: &FinancialSystem,
    opts: ClearingOptions,
    linear: (f64, f64),
    update: impl Fn(f64, f64, f64) -> f64,
) -> Result<ClearingResult> {
    let p_bar = total_obligations(system);
    let pi = relative_liabilities(system);
    let inflows = Inflows::new(&pi);
    let tol = opts.tolerance * p_bar.iter().copied().fold(1.0, f64::max);
    let step = |i: usize, e: f64, inflow: f64| update(e, inflow, p_bar[i]);
    let limit = |start: Vec<f64>| {
        monotone_limit(&pi, &inflows, &system.e, &p_bar, start, tol, opts.max_iterations, linear, step)
    };
    let (p, iterations) = limit(p_bar.clone())?;
    let upward = if opts.check_uniqueness {
        Some(limit(vec![0.0; p_bar.len()])?.0)
    } else {
        None
    };
    Ok(finish(system, &inflows, p_bar, p, iterations, upward, tol))
}

pub fn clear_eisenberg_noe(system: &FinancialSystem) -> Result<ClearingResult> {
    clear_eisenberg_noe_with(system, ClearingOptions::default())
}

pub fn clear_eisenberg_noe_with(system: &FinancialSystem, opts: ClearingOptions) -> Result<ClearingResult> {
    clear_with(system, opts, (1.0, 1.0), |e, inflow, p_bar| {
        let available = e + inflow;
        if available >= p_bar {
            p_bar
        } else {
            available
        }
    })
}

pub fn clear_rogers_veraart(system: &FinancialSystem, alpha: f64, beta: f64) -> Result<ClearingResult> {
    clear_rogers_veraart_with(system, alpha, beta, ClearingOptions::default())
}

pub fn clear_rogers_veraart_with(
    system: &FinancialSystem,
    alpha: f64,
    beta: f64,
    opts: ClearingOptions,
) -> Result<ClearingResult> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    clear_with(system, opts, (alpha, beta), |e, inflow, p_bar| {
        if e + inflow >= p_bar {
            p_bar
        } else {
            alpha * e + beta * inflow
        }
    })
}

/// Fictitious-default algorithm: fix the default set, solve the linear
/// payment equations of the defaulted banks exactly, update the set, repeat.
/// Terminates after at most `n` rounds since the set only grows.
pub fn clear_fictitious_default(system: &FinancialSystem) -> Result<ClearingResult> {
    let n = system.len();
    let p_bar = total_obligations(system);
    let pi = relative_liabilities(system);
    let inflows = Inflows::new(&pi);
    let mut p = p_bar.clone();
    let mut in_default = vec![false; n];
    for round in 1..=n + 1 {
        let mut grew = false;
        for i in 0..n {
            if !in_default[i] && system.e[i] + inflows.received(i, &p) < p_bar[i] - 1e-12 * p_bar[i].max(1.0) {
                in_default[i] = true;
                grew = true;
            }
        }
        if !grew {
            return Ok(finish(system, &inflows, p_bar, p, round, None, 0.0));
        }
        let d: Vec<usize> = (0..n).filter(|&i| in_default[i]).collect();
        let a: Matrix = d
            .iter()
            .map(|&i| d.iter().map(|&j| f64::from(i == j) - pi[j][i]).collect())
            .collect();
        let b: Vec<f64> = d
            .iter()
            .map(|&i| {
                system.e[i]
                    + (0..n)
                        .filter(|&j| !in_default[j])
                        .map(|j| pi[j][i] * p_bar[j])
                        .sum::<f64>()
            })
            .collect();
        let x = solve_dense(&a, &b)?;
        for (&i, v) in d.iter().zip(x) {
            p[i] = v.clamp(0.0, p_bar[i]);
        }
    }
    unreachable!("default set can grow at most n times")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(l: Matrix, e: Vec<f64>) -> FinancialSystem {
        FinancialSystem::new(l, e).unwrap()
    }

    #[test]
    fn slow_contraction_is_solved_exactly() {
        // Bank 1 passes 0.999 of what it receives back to bank 0, so the
        // iteration contracts at rate 0.999 and stalls far from the limit.
        let s = sys(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.001], vec![0.0; 3]], vec![0.0, 0.0005, 0.0]);
        let r = clear_eisenberg_noe(&s).unwrap();
        let p1 = 0.0005 / (1.0 - 1.0 / 1.001);
        assert!((r.p[1] - p1).abs() < 1e-12 && (r.p[0] - p1 / 1.001).abs() < 1e-12, "{:?}", r.p);
        assert!(r.uniqueness_gap.unwrap() < 1e-12);
        assert_eq!(r.unique, Some(true));
    }

    #[test]
    fn obligations_are_row_sums() {
        assert_eq!(total_obligations(&sys(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![0.0; 2])), vec![1.0, 2.0]);
        assert_eq!(total_obligations(&sys(vec![vec![0.0; 2]; 2], vec![0.0; 2])), vec![0.0, 0.0]);
    }

    #[test]
    fn relative_liabilities_rows() {
        let s = sys(
            vec![vec![0.0, 1.0, 3.0], vec![0.0; 3], vec![2.0, 2.0, 0.0]],
            vec![0.0; 3],
        );
        let pi = relative_liabilities(&s);
        assert_eq!(pi[0], vec![0.0, 0.25, 0.75]);
        assert_eq!(pi[1], vec![0.0; 3]);
        assert_eq!(pi[2], vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn ample_cash_pays_in_full() {
        let r = clear_eisenberg_noe(&sys(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0])).unwrap();
        assert_eq!(r.p, vec![1.0, 1.0]);
        assert!(r.defaults.is_empty());
    }

    #[test]
    fn single_default() {
        let s = sys(vec![vec![0.0, 2.0], vec![1.0, 0.0]], vec![0.5, 0.0]);
        let r = clear_eisenberg_noe(&s).unwrap();
        assert!((r.p[0] - 1.5).abs() < 1e-9 && (r.p[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.defaults, vec![0]);
        let f = clear_fictitious_default(&s).unwrap();
        assert!((f.p[0] - 1.5).abs() < 1e-12);
        assert_eq!(f.defaults, vec![0]);
    }

    #[test]
    fn rogers_veraart_insolvent_regime() {
        let s = sys(vec![vec![0.0, 2.0], vec![1.0, 0.0]], vec![0.5, 0.0]);
        let r = clear_rogers_veraart(&s, 0.5, 0.5).unwrap();
        assert!((r.p[0] - 1.0 / 3.0).abs() < 1e-9, "{:?}", r.p);
        assert!((r.p[1] - 1.0 / 6.0).abs() < 1e-9);
        assert_eq!(r.defaults, vec![0, 1]);
        let z = clear_rogers_veraart(&s, 0.0, 0.0).unwrap();
        assert_eq!(z.p, vec![0.0, 0.0]);
        assert!(clear_rogers_veraart(&s, 1.5, 0.5).is_err());
    }

    #[test]
    fn zero_equity_cycle_flags_multiple_fixed_points() {
        // Two banks owe each other and hold no cash: any p = (c, c) clears.
        let r = clear_eisenberg_noe(&sys(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0])).unwrap();
        assert_eq!(r.p, vec![1.0, 1.0]);
        assert_eq!(r.unique, Some(false));
    }

    #[test]
    fn sink_node_collects_external_debt() {
        let s = FinancialSystem::with_external_sink(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![1.0, 0.5], &[1.0, 1.0]).unwrap();
        let r = clear_eisenberg_noe(&s).unwrap();
        assert_eq!(r.p_bar, vec![0.0, 2.0, 1.0]);
        assert!(!r.defaults.contains(&0));
        // Bank 1 pays 1 of 2; half reaches bank 2, which then owns 1 and pays in full.
        assert!((r.p[1] - 1.0).abs() < 1e-9 && (r.p[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_systems_rejected() {
        assert!(FinancialSystem::new(vec![vec![1.0]], vec![0.0]).is_err());
        assert!(FinancialSystem::new(vec![vec![0.0, -1.0], vec![0.0, 0.0]], vec![0.0; 2]).is_err());
        assert!(FinancialSystem::new(vec![vec![0.0]], vec![-1.0]).is_err());
        assert!(FinancialSystem::new(vec![vec![0.0, 1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn json_schema() {
        let s: FinancialSystem = serde_json::from_str(r#"{"e": [1, 0], "L": [[0, 2], [1, 0]]}"#).unwrap();
        assert_eq!(s.external(), &[1.0, 0.0]);
        assert!(serde_json::from_str::<FinancialSystem>(r#"{"e": [1], "L": [[1]]}"#).is_err());
    }
}
