//! Small dense kernels shared by the model modules.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::{Error, Result};

/// Dense row-major square matrix.
pub type Matrix = Vec<Vec<f64>>;

pub(crate) fn check_square(m: &Matrix, name: &str) -> Result<usize> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::param(format!(
                "{name} must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterationOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

/// Spectral radius of a non-negative square matrix.
///
/// The radius is the largest over the strongly connected components of the
/// support graph. Components without internal edges contribute zero; each
/// irreducible block runs the power method on `B + I` from the uniform
/// vector. The unit shift makes periodic blocks aperiodic without moving the
/// Perron root, which is subtracted back at the end. Stops when the
/// Collatz-Wielandt bounds meet or successive estimates agree to `tolerance`.
pub fn spectral_radius_nonneg(m: &Matrix, opts: PowerIterationOptions) -> Result<f64> {
    let n = check_square(m, "matrix")?;
    if m.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::param("matrix entries must be finite and non-negative"));
    }
    let mut support = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| support.add_node(())).collect();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 {
                support.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut radius = 0.0_f64;
    for component in tarjan_scc(&support) {
        let idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        if idx.len() == 1 {
            radius = radius.max(m[idx[0]][idx[0]]);
            continue;
        }
        let block: Matrix = idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect();
        radius = radius.max(irreducible_radius(&block, opts)?);
    }
    Ok(radius)
}

fn irreducible_radius(m: &Matrix, opts: PowerIterationOptions) -> Result<f64> {
    let n = m.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut previous = f64::NAN;
    let mut gap = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        for (i, row) in m.iter().enumerate() {
            let mut acc = x[i];
            for (a, xj) in row.iter().zip(&x) {
                acc += a * xj;
            }
            y[i] = acc;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        // x sums to one, so the sum of y is the 1-norm growth factor.
        let estimate: f64 = y.iter().sum();
        let scale = estimate.max(1.0);
        gap = (estimate - previous).abs();
        if hi - lo <= opts.tolerance * scale || gap <= opts.tolerance * 1e-2 * scale {
            let radius = if hi - lo <= opts.tolerance * scale {
                0.5 * (hi + lo)
            } else {
                estimate
            };
            return Ok((radius - 1.0).max(0.0));
        }
        previous = estimate;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / estimate;
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        residual: gap,
    })
}

/// Solves `a x = b` by LU decomposition with partial pivoting.
pub fn solve_dense(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = check_square(a, "matrix")?;
    if b.len() != n {
        return Err(Error::param("right-hand side length mismatch"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("{n}x{n} system has no unique solution")))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_symmetric_pair() {
        let m = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
        let r = spectral_radius_nonneg(&m, Default::default()).unwrap();
        assert!((r - 0.5).abs() < 1e-10);
    }

    #[test]
    fn radius_of_zero_matrix() {
        let m = vec![vec![0.0; 3]; 3];
        assert_eq!(spectral_radius_nonneg(&m, Default::default()).unwrap(), 0.0);
    }

    #[test]
    fn radius_of_cyclic_permutation() {
        // Period-3 cycle: unshifted power iteration would oscillate forever.
        let m = vec![
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 2.0],
            vec![2.0, 0.0, 0.0],
        ];
        let r = spectral_radius_nonneg(&m, Default::default()).unwrap();
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn radius_of_reducible_block_matrix() {
        let m = vec![
            vec![0.3, 0.0, 0.0],
            vec![1.0, 0.0, 0.7],
            vec![0.0, 0.7, 0.0],
        ];
        let r = spectral_radius_nonneg(&m, Default::default()).unwrap();
        assert!((r - 0.7).abs() < 1e-8, "{r}");
    }

    #[test]
    fn radius_of_nilpotent_chain() {
        let m = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
        assert_eq!(spectral_radius_nonneg(&m, PowerIterationOptions::default()).unwrap(), 0.0);
        let m = vec![vec![0.5, 7.0], vec![0.0, 0.25]];
        assert_eq!(spectral_radius_nonneg(&m, PowerIterationOptions::default()).unwrap(), 0.5);
    }

    #[test]
    fn negative_entries_rejected() {
        let m = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        assert!(spectral_radius_nonneg(&m, Default::default()).is_err());
    }

    #[test]
    fn dense_solve_matches_hand_solution() {
        let a = vec![vec![1.0, -0.5], vec![-0.5, 1.0]];
        let x = solve_dense(&a, &[0.4, 0.0]).unwrap();
        assert!((x[0] - 8.0 / 15.0).abs() < 1e-14);
        assert!((x[1] - 4.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_reported() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(solve_dense(&a, &[1.0, 2.0]), Err(Error::Singular(_))));
    }
}
