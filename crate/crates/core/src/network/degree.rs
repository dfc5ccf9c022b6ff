use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::rng::Rng;
use crate::{Error, Result};

pub const DEFAULT_K_MAX: usize = 200;

/// Parametric or tabulated degree distribution before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeDistribution {
    Poisson { z: f64 },
    Regular { z: usize },
    PowerLaw { exponent: f64, k_min: usize },
    LogNormal { mu: f64, sigma: f64 },
    /// `p[k]` is the probability of degree `k`.
    Empirical { p: Vec<f64> },
}

/// A degree distribution truncated at `k_max` and renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeModel {
    distribution: DegreeDistribution,
    k_max: usize,
    p: Vec<f64>,
    tail_k2: f64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl DegreeModel {
    pub fn new(distribution: DegreeDistribution, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::param("k_max must be at least 1"));
        }
        let (raw, tail_k2) = match &distribution {
            DegreeDistribution::Poisson { z } => poisson_table(*z, k_max)?,
            DegreeDistribution::Regular { z } => {
                if *z > k_max {
                    return Err(Error::param(format!("regular degree {z} exceeds k_max {k_max}")));
                }
                let mut p = vec![0.0; z + 1];
                p[*z] = 1.0;
                (p, 0.0)
            }
            DegreeDistribution::PowerLaw { exponent, k_min } => power_law_table(*exponent, *k_min, k_max)?,
            DegreeDistribution::LogNormal { mu, sigma } => log_normal_table(*mu, *sigma, k_max)?,
            DegreeDistribution::Empirical { p } => empirical_table(p, k_max)?,
        };
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::param("degree distribution has no mass below k_max"));
        }
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let model = Self {
            distribution,
            k_max,
            p,
            tail_k2,
        };
        if !(model.mean() > 0.0) {
            return Err(Error::param("mean degree must be positive"));
        }
        Ok(model)
    }

    pub fn poisson(z: f64) -> Result<Self> {
        Self::new(DegreeDistribution::Poisson { z }, DEFAULT_K_MAX)
    }

    pub fn regular(z: usize) -> Result<Self> {
        Self::new(DegreeDistribution::Regular { z }, DEFAULT_K_MAX.max(z))
    }

    pub fn distribution(&self) -> &DegreeDistribution {
        &self.distribution
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Probability table indexed by degree; its length may be below `k_max + 1`
    /// when the distribution has no mass at the top.
    pub fn pmf(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.p.get(k).copied().unwrap_or(0.0)
    }

    /// Mean degree `z`.
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Second factorial moment `<k(k-1)>`.
    pub fn factorial_moment2(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k.saturating_sub(1)) as f64 * p)
            .sum()
    }

    /// Bound on what truncation discards, `sum_{k > k_max} p_k k^2` of the
    /// untruncated distribution. Infinite for power laws with exponent <= 3.
    pub fn truncation_error_bound(&self) -> f64 {
        self.tail_k2
    }
}

fn poisson_table(z: f64, k_max: usize) -> Result<(Vec<f64>, f64)> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::param(format!("Poisson mean must be positive, got {z}")));
    }
    // Log-space recurrence keeps large z from underflowing exp(-z).
    let log_pk = |k: usize, prev: f64| if k == 0 { -z } else { prev + (z / k as f64).ln() };
    let mut p = Vec::with_capacity(k_max + 1);
    let mut lp = 0.0;
    for k in 0..=k_max {
        lp = log_pk(k, lp);
        p.push(lp.exp());
    }
    let mut tail = 0.0;
    let mut k = k_max;
    loop {
        k += 1;
        lp = log_pk(k, lp);
        let term = lp.exp() * (k * k) as f64;
        tail += term;
        if (k as f64 > z && term < 1e-300) || k > k_max + 100_000 {
            break;
        }
    }
    Ok((p, tail))
}

fn power_law_table(exponent: f64, k_min: usize, k_max: usize) -> Result<(Vec<f64>, f64)> {
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(Error::param(format!("power-law exponent must be positive, got {exponent}")));
    }
    if k_min == 0 || k_min > k_max {
        return Err(Error::param(format!("power-law k_min must lie in 1..=k_max, got {k_min}")));
    }
    let mut p = vec![0.0; k_max + 1];
    let mut norm = 0.0;
    for (k, slot) in p.iter_mut().enumerate().skip(k_min) {
        *slot = (k as f64).powf(-exponent);
        norm += *slot;
    }
    // Tail normalised against the truncated mass; integral bound on the sum.
    let tail = if exponent <= 3.0 {
        f64::INFINITY
    } else {
        let c = k_max as f64 + 0.5;
        c.powf(3.0 - exponent) / (exponent - 3.0) / norm
    };
    Ok((p, tail))
}

fn log_normal_table(mu: f64, sigma: f64, k_max: usize) -> Result<(Vec<f64>, f64)> {
    if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!("log-normal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
    }
    // Degree k collects the continuous mass on (k - 1/2, k + 1/2].
    let cdf = |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            std_normal_cdf((x.ln() - mu) / sigma)
        }
    };
    let p: Vec<f64> = (0..=k_max)
        .map(|k| cdf(k as f64 + 0.5) - cdf(k as f64 - 0.5))
        .collect();
    let c = k_max as f64 + 0.5;
    let tail = (2.0 * mu + 2.0 * sigma * sigma).exp() * std_normal_cdf((mu + 2.0 * sigma * sigma - c.ln()) / sigma);
    Ok((p, tail))
}

fn empirical_table(p: &[f64], k_max: usize) -> Result<(Vec<f64>, f64)> {
    if p.is_empty() {
        return Err(Error::param("empirical degree table is empty"));
    }
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::param(format!("empirical probabilities must be non-negative, got {v}")));
    }
    let total: f64 = p.iter().sum();
    let kept: Vec<f64> = p.iter().take(k_max + 1).copied().collect();
    let tail = p
        .iter()
        .enumerate()
        .skip(k_max + 1)
        .map(|(k, v)| v / total * (k * k) as f64)
        .sum();
    Ok((kept, tail))
}

/// Draws `n` i.i.d. degrees from the truncated table by inverse-CDF lookup.
pub fn sample_degree_sequence(model: &DegreeModel, n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(model.p.len());
    let mut acc = 0.0;
    for &v in &model.p {
        acc += v;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    // Degenerate tables need no randomness; keep the stream untouched.
    if let Some(k) = model.p.iter().position(|&v| v == 1.0) {
        return vec![k; n];
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn assert_normalised(m: &DegreeModel) {
        let s: f64 = m.pmf().iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "sum {s}");
        assert!(m.pmf().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn poisson_moments() {
        let m = DegreeModel::poisson(4.0).unwrap();
        assert_normalised(&m);
        assert!((m.mean() - 4.0).abs() < 1e-12);
        assert!((m.factorial_moment2() - 16.0).abs() < 1e-10);
        assert!(m.truncation_error_bound() < 1e-100);
    }

    #[test]
    fn poisson_large_mean_does_not_underflow() {
        let m = DegreeModel::new(DegreeDistribution::Poisson { z: 800.0 }, 2000).unwrap();
        assert!((m.mean() - 800.0).abs() < 1e-8);
    }

    #[test]
    fn regular_is_degenerate() {
        let m = DegreeModel::regular(3).unwrap();
        assert_eq!(m.prob(3), 1.0);
        assert_eq!(m.mean(), 3.0);
        assert_eq!(m.factorial_moment2(), 6.0);
    }

    #[test]
    fn power_law_tail_bound() {
        let m = DegreeModel::new(DegreeDistribution::PowerLaw { exponent: 2.5, k_min: 1 }, 100).unwrap();
        assert_normalised(&m);
        assert_eq!(m.prob(0), 0.0);
        assert!(m.truncation_error_bound().is_infinite());
        let m = DegreeModel::new(DegreeDistribution::PowerLaw { exponent: 4.0, k_min: 2 }, 100).unwrap();
        assert!(m.truncation_error_bound().is_finite());
        assert_eq!(m.prob(1), 0.0);
    }

    #[test]
    fn log_normal_is_normalised() {
        let m = DegreeModel::new(DegreeDistribution::LogNormal { mu: 1.0, sigma: 0.5 }, 200).unwrap();
        assert_normalised(&m);
        // Mean of the continuous law is exp(mu + sigma^2/2) ~ 3.08; rounding
        // to the nearest integer barely moves it.
        assert!((m.mean() - (1.0f64 + 0.125).exp()).abs() < 0.05, "{}", m.mean());
    }

    #[test]
    fn empirical_truncates_and_renormalises() {
        let m = DegreeModel::new(DegreeDistribution::Empirical { p: vec![0.0, 0.5, 0.25, 0.25] }, 2).unwrap();
        assert_normalised(&m);
        assert!((m.prob(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.truncation_error_bound() - 0.25 * 9.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(DegreeModel::poisson(0.0).is_err());
        assert!(DegreeModel::poisson(f64::NAN).is_err());
        assert!(DegreeModel::new(DegreeDistribution::Regular { z: 0 }, 10).is_err());
        assert!(DegreeModel::new(DegreeDistribution::Regular { z: 11 }, 10).is_err());
        assert!(DegreeModel::new(DegreeDistribution::Empirical { p: vec![1.0] }, 10).is_err());
        assert!(DegreeModel::new(DegreeDistribution::Empirical { p: vec![0.5, -0.1] }, 10).is_err());
        assert!(DegreeModel::new(DegreeDistribution::PowerLaw { exponent: 2.0, k_min: 0 }, 10).is_err());
    }

    #[test]
    fn degenerate_sampling() {
        let mut rng = seeded(1);
        let m = DegreeModel::regular(3).unwrap();
        assert_eq!(sample_degree_sequence(&m, 5, &mut rng), vec![3; 5]);
        let m = DegreeModel::new(DegreeDistribution::Empirical { p: vec![0.0, 1.0] }, 200).unwrap();
        assert_eq!(sample_degree_sequence(&m, 4, &mut rng), vec![1; 4]);
    }

    #[test]
    fn poisson_sample_mean() {
        // Standard error of the mean is sqrt(6 / 1e5) ~ 0.0077, so 0.1 is ~13 sigma.
        let mut rng = seeded(2024);
        let m = DegreeModel::poisson(6.0).unwrap();
        let s = sample_degree_sequence(&m, 100_000, &mut rng);
        let mean = s.iter().sum::<usize>() as f64 / s.len() as f64;
        assert!((mean - 6.0).abs() < 0.1, "{mean}");
    }
}
