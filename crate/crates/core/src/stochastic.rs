//! Dense row-stochastic matrices acting on densities from the right
//! (`f ↦ f·P`) and the power iteration shared by every fixed-density search.

use rayon::prelude::*;

use crate::density::DensityOnI;
use crate::error::{Error, Result};

/// Per-row tolerance on the row sums of a [`StochasticMatrix`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    /// Row-major entries.
    rows: Vec<f64>,
    /// Column-major copy used by `apply`, one contiguous slice per output bin.
    cols: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds a matrix from row-major entries, checking every row sums to one
    /// within `tolerance`.
    pub fn from_rows(n: usize, rows: Vec<f64>, tolerance: f64) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::InputSize(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                rows.len()
            )));
        }
        for (i, row) in rows.chunks_exact(n).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Assembly {
                    row: i,
                    sum: f64::NAN,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::Assembly { row: i, sum });
            }
        }
        let mut cols = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cols[j * n + i] = rows[i * n + j];
            }
        }
        Ok(Self { n, rows, cols })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    pub fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    /// Maximum deviation of a row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        self.rows
            .chunks_exact(self.n)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times matrix. Each output entry is a fixed-order serial sum,
    /// so the result does not depend on the thread count.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "vector length must match matrix size");
        self.cols
            .par_chunks_exact(self.n)
            .map(|col| col.iter().zip(f).map(|(p, x)| p * x).sum())
            .collect()
    }

    pub fn apply_density(&self, f: &DensityOnI) -> Result<DensityOnI> {
        if f.n_bins() != self.n {
            return Err(Error::Shape {
                left: f.n_bins(),
                right: self.n,
            });
        }
        DensityOnI::from_masses(self.apply(f.weights()))
    }
}

/// Result of a converged power iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub density: DensityOnI,
    /// Number of matrix applications that produced `density` from the start.
    pub iterations: usize,
    /// L1 norm of `density·P − density`.
    pub residual: f64,
}

/// Iterates `f ← f·P` from `f0` and returns the first iterate `f_n` whose
/// next step moves it by less than `tol` in L1.
pub fn power_iterate(
    p: &StochasticMatrix,
    f0: &DensityOnI,
    max_iter: usize,
    tol: f64,
) -> Result<FixedPoint> {
    if f0.n_bins() != p.n() {
        return Err(Error::Shape {
            left: f0.n_bins(),
            right: p.n(),
        });
    }
    let mut current = f0.weights().to_vec();
    let mut change = f64::INFINITY;
    for n in 0..=max_iter {
        let next = normalized(p.apply(&current));
        change = l1(&next, &current);
        if change < tol {
            return Ok(FixedPoint {
                density: DensityOnI::from_raw_unchecked(current),
                iterations: n,
                residual: change,
            });
        }
        current = next;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_change: change,
        last: Box::new(DensityOnI::from_raw_unchecked(current)),
    })
}

pub(crate) fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

#[inline]
pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
