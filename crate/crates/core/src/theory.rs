//! Mean-field analysis of threshold cascades on configuration-model networks.
//!
//! A node of degree `k` with `m` active neighbours activates with
//! probability `F(m / k)`. On a locally tree-like network the probability
//! `q` that a neighbour is active solves
//!
//! ```text
//! q = rho0 + (1 - rho0) S(q),
//! S(q) = sum_k (k p_k / z) sum_{m<k} Binom(k-1, m; q) F(m / k),
//! ```
//!
//! and the mean cascade size follows from the degree distribution itself.
//! The vulnerable-cluster moments `g0, g1, g2` give the mean vulnerable
//! cluster size and the percolation form of the cascade condition.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::network::DegreeModel;
use crate::{Error, Result};

/// Probability that a node activates given the fraction of its neighbours
/// already active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseFunction {
    /// Deterministic threshold: activate iff the active fraction exceeds `r`.
    Threshold { r: f64 },
    /// `F` identically equal to `value`.
    Constant { value: f64 },
    /// Threshold drawn uniformly from `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Normally distributed threshold.
    Gaussian { mean: f64, sd: f64 },
    /// Piecewise-linear CDF through `(x[i], f[i])`, flat outside.
    Tabulated { x: Vec<f64>, f: Vec<f64> },
}

impl ResponseFunction {
    pub fn threshold(r: f64) -> Self {
        Self::Threshold { r }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Threshold { r } if r.is_nan() => Err(Error::param("threshold is NaN")),
            Self::Constant { value } if !(0.0..=1.0).contains(value) => {
                Err(Error::param(format!("constant response {value} outside [0, 1]")))
            }
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::param("uniform threshold needs finite lo < hi"))
            }
            Self::Gaussian { mean, sd } if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) => {
                Err(Error::param("gaussian threshold needs finite mean and sd > 0"))
            }
            Self::Tabulated { x, f } => {
                if x.is_empty() || x.len() != f.len() {
                    return Err(Error::param("tabulated response needs equal, nonempty x and f"));
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::param("tabulated x must be strictly increasing"));
                }
                if f.windows(2).any(|w| w[0] > w[1]) || f.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::param("tabulated F must be nondecreasing within [0, 1]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `F(x)`; `x` may be `+inf`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Threshold { r } => f64::from(u8::from(x > *r)),
            Self::Constant { value } => *value,
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Gaussian { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)),
            Self::Tabulated { x: xs, f } => {
                let i = xs.partition_point(|&v| v <= x);
                if i == 0 {
                    f[0]
                } else if i == xs.len() {
                    f[f.len() - 1]
                } else {
                    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    f[i - 1] + t * (f[i] - f[i - 1])
                }
            }
        }
    }
}

/// A boolean verdict together with the quantity it was read from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCondition {
    pub holds: bool,
    pub discriminant: f64,
    pub c: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ClusterSize {
    Finite(f64),
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VulnerableMoments {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryResult {
    pub z: f64,
    pub q_star: f64,
    pub rho: f64,
    pub iterations: usize,
    pub moments: VulnerableMoments,
    pub mean_cluster_size: ClusterSize,
    pub first_order: Condition,
    pub second_order: SecondOrderCondition,
    pub watts: Condition,
    pub truncation_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    /// Stop once successive iterates differ by at most this much.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100_000,
        }
    }
}

/// Terms with `k^2 p_k` below this are dropped from the binomial sums.
const NEGLIGIBLE: f64 = 1e-25;

/// Degree table with `F(m / k)` precomputed for every `m <= k`.
struct Kernel<'a> {
    p: &'a [f64],
    z: f64,
    k_top: usize,
    ln_fact: Vec<f64>,
    /// `f[k][m] = F(m / k)`; `f[0][0] = F(0)`.
    f: Vec<Vec<f64>>,
}

impl<'a> Kernel<'a> {
    fn new(model: &'a DegreeModel, response: &ResponseFunction) -> Result<Self> {
        response.validate()?;
        let p = model.pmf();
        let z = model.mean();
        if !(z > 0.0) {
            return Err(Error::param("mean degree must be positive"));
        }
        let k_top = (0..p.len())
            .rev()
            .find(|&k| p[k] * (k * k) as f64 >= NEGLIGIBLE)
            .unwrap_or(0);
        let mut ln_fact = vec![0.0; k_top + 2];
        for i in 1..ln_fact.len() {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let f = (0..=k_top)
            .map(|k| {
                if k == 0 {
                    vec![response.eval(0.0)]
                } else {
                    (0..=k).map(|m| response.eval(m as f64 / k as f64)).collect()
                }
            })
            .collect();
        Ok(Self { p, z, k_top, ln_fact, f })
    }

    fn binom(&self, n: usize, m: usize, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::from(u8::from(m == 0));
        }
        if q >= 1.0 {
            return f64::from(u8::from(m == n));
        }
        let ln_c = self.ln_fact[n] - self.ln_fact[m] - self.ln_fact[n - m];
        (ln_c + m as f64 * q.ln() + (n - m) as f64 * (-q).ln_1p()).exp()
    }

    fn s(&self, q: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..=self.k_top {
            let pk = self.p[k];
            if pk == 0.0 {
                continue;
            }
            let inner: f64 = (0..k).map(|m| self.binom(k - 1, m, q) * self.f[k][m]).sum();
            total += k as f64 / self.z * pk * inner;
        }
        total
    }

    /// Fraction of active nodes given neighbour activation probability `q`,
    /// excluding seeds. Isolated nodes respond to `F(0)`.
    fn activated(&self, q: f64) -> f64 {
        let mut total = self.p[0] * self.f[0][0];
        for k in 1..=self.k_top {
            let pk = self.p[k];
            if pk == 0.0 {
                continue;
            }
            let inner: f64 = (0..=k).map(|m| self.binom(k, m, q) * self.f[k][m]).sum();
            total += pk * inner;
        }
        total
    }

    fn c(&self, l: usize) -> f64 {
        let mut total = 0.0;
        for k in l + 1..=self.k_top {
            let pk = self.p[k];
            if pk == 0.0 {
                continue;
            }
            let ln_ck = self.ln_fact[k - 1] - self.ln_fact[l] - self.ln_fact[k - 1 - l];
            let mut inner = 0.0;
            for n in 0..=l {
                let ln_cl = self.ln_fact[l] - self.ln_fact[n] - self.ln_fact[l - n];
                let sign = if (l - n) % 2 == 0 { 1.0 } else { -1.0 };
                inner += sign * ln_cl.exp() * self.f[k][n];
            }
            total += ln_ck.exp() * inner * k as f64 / self.z * pk;
        }
        total
    }
}

fn check_rho0(rho0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho0) {
        Ok(())
    } else {
        Err(Error::param(format!("seed fraction must lie in [0, 1], got {rho0}")))
    }
}

/// Smallest fixed point `q*` by monotone iteration from `q = rho0`, and the
/// resulting mean cascade size. Returns `(q*, rho, iterations)`.
pub fn solve_mean_cascade_size(model: &DegreeModel, response: &ResponseFunction, rho0: f64) -> Result<(f64, f64, usize)> {
    solve_mean_cascade_size_with(model, response, rho0, FixedPointOptions::default())
}

pub fn solve_mean_cascade_size_with(
    model: &DegreeModel,
    response: &ResponseFunction,
    rho0: f64,
    opts: FixedPointOptions,
) -> Result<(f64, f64, usize)> {
    check_rho0(rho0)?;
    let kernel = Kernel::new(model, response)?;
    let map = |q: f64| (rho0 + (1.0 - rho0) * kernel.s(q)).clamp(0.0, 1.0);
    let mut q = rho0;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let next = map(q);
        change = (next - q).abs();
        // The map is monotone, so iterates never decrease; max() only
        // absorbs rounding.
        q = next.max(q);
        if change <= opts.tolerance {
            let rho = (rho0 + (1.0 - rho0) * kernel.activated(q)).clamp(rho0, 1.0);
            return Ok((q, rho, it));
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual: change,
    })
}

/// `(1 - rho0) sum_k k(k-1)/z p_k [F(1/k) - F(0)] > 1`.
pub fn first_order_cascade_condition(model: &DegreeModel, response: &ResponseFunction, rho0: f64) -> Result<Condition> {
    check_rho0(rho0)?;
    let kernel = Kernel::new(model, response)?;
    let f0 = response.eval(0.0);
    let sum: f64 = (2..=kernel.k_top)
        .map(|k| {
            let kf = k as f64;
            kf * (kf - 1.0) / kernel.z * kernel.p[k] * (kernel.f[k][1] - f0)
        })
        .sum();
    let value = (1.0 - rho0) * sum;
    Ok(Condition { holds: value > 1.0, value })
}

/// Coefficients `C_0, C_1, C_2` of `S(q)` about `q = 0`.
pub fn expansion_coefficients(model: &DegreeModel, response: &ResponseFunction) -> Result<[f64; 3]> {
    let kernel = Kernel::new(model, response)?;
    Ok([kernel.c(0), kernel.c(1), kernel.c(2)])
}

/// Quadratic truncation `q = rho0 + (1 - rho0)(C0 + C1 q + C2 q^2)` of the
/// fixed-point equation. Cascades are possible when it has no root near
/// zero: either the discriminant
/// `(C1-1)^2 - 4 C0 C2 + 2 rho0 (C1 - C1^2 - 2 C2 + 4 C0 C2)` is negative
/// (no real root), or the linear term alone already pushes `q` away from
/// zero, `(1 - rho0) C1 > 1`, so that the small root is negative.
pub fn second_order_cascade_condition(
    model: &DegreeModel,
    response: &ResponseFunction,
    rho0: f64,
) -> Result<SecondOrderCondition> {
    check_rho0(rho0)?;
    let c = expansion_coefficients(model, response)?;
    let [c0, c1, c2] = c;
    let discriminant = (c1 - 1.0).powi(2) - 4.0 * c0 * c2 + 2.0 * rho0 * (c1 - c1 * c1 - 2.0 * c2 + 4.0 * c0 * c2);
    Ok(SecondOrderCondition {
        holds: discriminant < 0.0 || (1.0 - rho0) * c1 > 1.0,
        discriminant,
        c,
    })
}

/// `mu_k = F(1/k)` for `k > 0` and `mu_0 = F(inf)`.
pub fn vulnerable_generating_moments(model: &DegreeModel, response: &ResponseFunction) -> Result<VulnerableMoments> {
    response.validate()?;
    let mut m = VulnerableMoments { g0: 0.0, g1: 0.0, g2: 0.0 };
    for (k, &pk) in model.pmf().iter().enumerate() {
        let mu = if k == 0 {
            response.eval(f64::INFINITY)
        } else {
            response.eval(1.0 / k as f64)
        };
        let kf = k as f64;
        m.g0 += mu * pk;
        m.g1 += kf * mu * pk;
        m.g2 += kf * (kf - 1.0) * mu * pk;
    }
    Ok(m)
}

/// `g0 + g1^2 / (z - g2)`, divergent once `z <= g2`.
pub fn mean_vulnerable_cluster_size(model: &DegreeModel, response: &ResponseFunction) -> Result<ClusterSize> {
    let m = vulnerable_generating_moments(model, response)?;
    let z = model.mean();
    Ok(if z > m.g2 {
        ClusterSize::Finite(m.g0 + m.g1 * m.g1 / (z - m.g2))
    } else {
        ClusterSize::Divergent
    })
}

/// `z < g2`, reported with margin `g2 - z`.
pub fn watts_cascade_condition(model: &DegreeModel, response: &ResponseFunction) -> Result<Condition> {
    let m = vulnerable_generating_moments(model, response)?;
    let value = m.g2 - model.mean();
    Ok(Condition { holds: value > 0.0, value })
}

pub fn analyze(model: &DegreeModel, response: &ResponseFunction, rho0: f64) -> Result<TheoryResult> {
    let (q_star, rho, iterations) = solve_mean_cascade_size(model, response, rho0)?;
    Ok(TheoryResult {
        z: model.mean(),
        q_star,
        rho,
        iterations,
        moments: vulnerable_generating_moments(model, response)?,
        mean_cluster_size: mean_vulnerable_cluster_size(model, response)?,
        first_order: first_order_cascade_condition(model, response, rho0)?,
        second_order: second_order_cascade_condition(model, response, rho0)?,
        watts: watts_cascade_condition(model, response)?,
        truncation_error: model.truncation_error_bound(),
    })
}

/// Locates the point in `[a, b]` where `pred` changes value, to within
/// `tol`. `pred(a)` and `pred(b)` must differ.
pub fn bisect_boundary(mut pred: impl FnMut(f64) -> Result<bool>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let at_a = pred(a)?;
    if pred(b)? == at_a {
        return Err(Error::param(format!("predicate does not change sign on [{a}, {b}]")));
    }
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if pred(mid)? == at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
