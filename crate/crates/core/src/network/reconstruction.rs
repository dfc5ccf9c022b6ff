use serde::{Deserialize, Serialize};

use super::DirectedGraph;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Aggregate interbank positions: what each bank lent (`assets`) and
/// borrowed (`liabilities`) in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVector {
    pub assets: Vec<f64>,
    pub liabilities: Vec<f64>,
}

impl MarginVector {
    pub fn new(assets: Vec<f64>, liabilities: Vec<f64>) -> Result<Self> {
        let m = Self { assets, liabilities };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.assets.len() != self.liabilities.len() {
            return Err(Error::param("asset and liability margins differ in length"));
        }
        if let Some(v) = self
            .assets
            .iter()
            .chain(&self.liabilities)
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::param(format!("margins must be finite and non-negative, got {v}")));
        }
        let (sa, sl): (f64, f64) = (self.assets.iter().sum(), self.liabilities.iter().sum());
        if (sa - sl).abs() > 1e-9 * sa.max(sl) {
            return Err(Error::param(format!(
                "total lending {sa} does not match total borrowing {sl}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpfOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for IpfOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// `exposures[i][j]`: estimated lending from `i` to `j`; zero diagonal.
    pub exposures: Matrix,
    pub sweeps: usize,
    /// Largest relative margin mismatch at exit.
    pub residual: f64,
}

impl Reconstruction {
    /// Weighted lender-to-borrower graph of the positive entries.
    pub fn to_graph(&self) -> DirectedGraph {
        let n = self.exposures.len();
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for (i, row) in self.exposures.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x > 0.0 {
                    edges.push((i, j));
                    weights.push(x);
                }
            }
        }
        DirectedGraph::with_weights(n, edges, weights).expect("reconstruction yields a simple graph")
    }
}

fn relative_gap(actual: f64, target: f64) -> f64 {
    if target > 0.0 {
        (actual - target).abs() / target
    } else {
        actual.abs()
    }
}

fn margin_residual(x: &Matrix, m: &MarginVector) -> f64 {
    let n = x.len();
    let mut worst = 0.0_f64;
    for i in 0..n {
        let row: f64 = x[i].iter().sum();
        let col: f64 = x.iter().map(|r| r[i]).sum();
        worst = worst
            .max(relative_gap(row, m.assets[i]))
            .max(relative_gap(col, m.liabilities[i]));
    }
    worst
}

/// Maximum-entropy exposure matrix: iterative proportional fitting of the
/// outer product `assets_i * liabilities_j` with the diagonal forced to zero.
pub fn max_entropy_reconstruction(margins: &MarginVector, opts: IpfOptions) -> Result<Reconstruction> {
    margins.validate()?;
    let n = margins.len();
    if n < 2 {
        return Err(Error::param("reconstruction needs at least two banks"));
    }
    let (a, l) = (&margins.assets, &margins.liabilities);
    let mut x: Matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { a[i] * l[j] }).collect())
        .collect();

    let mut residual = margin_residual(&x, margins);
    for sweep in 1..=opts.max_sweeps {
        for i in 0..n {
            let s: f64 = x[i].iter().sum();
            if s > 0.0 {
                let f = a[i] / s;
                x[i].iter_mut().for_each(|v| *v *= f);
            } else if a[i] > 0.0 {
                return Err(Error::Convergence {
                    iterations: sweep,
                    residual: 1.0,
                });
            }
        }
        for j in 0..n {
            let s: f64 = x.iter().map(|r| r[j]).sum();
            if s > 0.0 {
                let f = l[j] / s;
                x.iter_mut().for_each(|r| r[j] *= f);
            } else if l[j] > 0.0 {
                return Err(Error::Convergence {
                    iterations: sweep,
                    residual: 1.0,
                });
            }
        }
        residual = margin_residual(&x, margins);
        if residual <= opts.tolerance {
            return Ok(Reconstruction {
                exposures: x,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_sweeps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(a: &[f64], l: &[f64]) -> Result<Reconstruction> {
        max_entropy_reconstruction(&MarginVector::new(a.to_vec(), l.to_vec())?, IpfOptions::default())
    }

    #[test]
    fn two_banks_forced() {
        let r = run(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.exposures, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn symmetric_three_banks() {
        let r = run(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((r.exposures[i][j] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn asymmetric_margins_reproduced() {
        let r = run(&[2.0, 1.0, 1.0], &[1.0, 1.0, 2.0]).unwrap();
        assert!(margin_residual(&r.exposures, &MarginVector::new(vec![2.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]).unwrap()) < 1e-8);
        assert!(r.exposures.iter().enumerate().all(|(i, row)| row[i] == 0.0));
        let g = r.to_graph();
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn monopolist_is_infeasible() {
        match run(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]) {
            Err(Error::Convergence { .. }) => {}
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn near_infeasible_runs_out_of_sweeps() {
        let m = MarginVector::new(vec![3.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]).unwrap();
        let opts = IpfOptions {
            max_sweeps: 200,
            ..Default::default()
        };
        match max_entropy_reconstruction(&m, opts) {
            Err(Error::Convergence { iterations, residual }) => {
                assert_eq!(iterations, 200);
                assert!(residual > 1e-3);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_totals_rejected() {
        assert!(MarginVector::new(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(MarginVector::new(vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
    }
}
