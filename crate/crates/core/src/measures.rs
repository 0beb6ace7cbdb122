//! Histogram measures on `I` and `I²` and the distances used to compare them.
//!
//! All 2-D objects reuse the 1-D partition on both axes, so every metric here
//! is finite arithmetic on bin masses.

use std::f64::consts::PI;

use crate::density::{bin_center, bin_index, bin_width, DensityOnI, MASS_TOLERANCE};
use crate::error::{Error, Result};

fn same_shape(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape { left: a, right: b })
    }
}

/// `Σ_j |a_j − b_j|`.
pub fn l1_distance(a: &DensityOnI, b: &DensityOnI) -> Result<f64> {
    same_shape(a.n_bins(), b.n_bins())?;
    Ok(a.weights()
        .iter()
        .zip(b.weights())
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Total variation, half the L1 distance.
pub fn tv_distance(a: &DensityOnI, b: &DensityOnI) -> Result<f64> {
    l1_distance(a, b).map(|d| 0.5 * d)
}

/// Wasserstein-1 on the line: bin width times the L1 distance of the CDFs.
pub fn w1_distance(a: &DensityOnI, b: &DensityOnI) -> Result<f64> {
    same_shape(a.n_bins(), b.n_bins())?;
    let (mut fa, mut fb, mut acc) = (0.0, 0.0, 0.0);
    for (x, y) in a.weights().iter().zip(b.weights()) {
        fa += x;
        fb += y;
        acc += (fa - fb).abs();
    }
    Ok(acc * bin_width(a.n_bins()))
}

/// Probability masses on the `n × n` product partition of `I²`. Cell `(i, j)`
/// is x-bin `i`, y-bin `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hist2D {
    n_bins: usize,
    weights: Vec<f64>,
    /// Integer cell counts when built from points; marginals are then exact.
    counts: Option<Vec<u64>>,
}

impl Hist2D {
    pub fn new(n_bins: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_bins * n_bins || n_bins == 0 {
            return Err(Error::InputSize(format!(
                "{} cells for a {n_bins}x{n_bins} grid",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDensity("negative or non-finite cell".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!("cells sum to {total}")));
        }
        Ok(Self {
            n_bins,
            weights,
            counts: None,
        })
    }

    pub fn from_counts(n_bins: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidDensity("no points".into()));
        }
        if counts.len() != n_bins * n_bins {
            return Err(Error::InputSize(format!(
                "{} cells for a {n_bins}x{n_bins} grid",
                counts.len()
            )));
        }
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            n_bins,
            weights,
            counts: Some(counts.to_vec()),
        })
    }

    /// Histogram of simultaneous pairs `(xs[i], ys[i])`.
    pub fn from_pairs(n_bins: usize, xs: &[f64], ys: &[f64]) -> Result<Self> {
        same_shape(xs.len(), ys.len())?;
        let mut counts = vec![0u64; n_bins * n_bins];
        for (&x, &y) in xs.iter().zip(ys) {
            counts[bin_index(n_bins, x) * n_bins + bin_index(n_bins, y)] += 1;
        }
        Self::from_counts(n_bins, &counts)
    }

    #[inline]
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_bins + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distribution of the first (master) coordinate.
    pub fn marginal_x(&self) -> Result<DensityOnI> {
        if let Some(counts) = &self.counts {
            let rows: Vec<u64> = counts
                .chunks_exact(self.n_bins)
                .map(|r| r.iter().sum())
                .collect();
            return DensityOnI::from_counts(&rows);
        }
        DensityOnI::from_masses(
            self.weights
                .chunks_exact(self.n_bins)
                .map(|row| row.iter().sum())
                .collect(),
        )
    }

    /// Distribution of the second (slave) coordinate.
    pub fn marginal_y(&self) -> Result<DensityOnI> {
        if let Some(counts) = &self.counts {
            let mut cols = vec![0u64; self.n_bins];
            for row in counts.chunks_exact(self.n_bins) {
                cols.iter_mut().zip(row).for_each(|(a, c)| *a += c);
            }
            return DensityOnI::from_counts(&cols);
        }
        let mut m = vec![0.0; self.n_bins];
        for row in self.weights.chunks_exact(self.n_bins) {
            m.iter_mut().zip(row).for_each(|(a, w)| *a += w);
        }
        DensityOnI::from_masses(m)
    }

    pub fn l1_distance(&self, other: &Hist2D) -> Result<f64> {
        same_shape(self.n_bins, other.n_bins)?;
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    pub fn tv_distance(&self, other: &Hist2D) -> Result<f64> {
        self.l1_distance(other).map(|d| 0.5 * d)
    }
}

/// `a ⊗ b`.
pub fn product_measure(a: &DensityOnI, b: &DensityOnI) -> Result<Hist2D> {
    same_shape(a.n_bins(), b.n_bins())?;
    let n = a.n_bins();
    let mut weights = Vec::with_capacity(n * n);
    for &wa in a.weights() {
        weights.extend(b.weights().iter().map(|&wb| wa * wb));
    }
    Ok(Hist2D {
        n_bins: n,
        weights,
        counts: None,
    })
}

/// Image of `a` under `x ↦ (x, x)`.
pub fn diagonal_pushforward(a: &DensityOnI) -> Hist2D {
    let n = a.n_bins();
    let mut weights = vec![0.0; n * n];
    for (i, &w) in a.weights().iter().enumerate() {
        weights[i * n + i] = w;
    }
    Hist2D {
        n_bins: n,
        weights,
        counts: None,
    }
}

/// `E|η₁ − η₂|` with both coordinates placed at their bin centers.
pub fn mean_abs_diff(j: &Hist2D) -> f64 {
    let n = j.n_bins;
    let mut acc = 0.0;
    for (i, row) in j.weights.chunks_exact(n).enumerate() {
        let x = bin_center(n, i);
        for (k, &w) in row.iter().enumerate() {
            if w != 0.0 {
                acc += w * (x - bin_center(n, k)).abs();
            }
        }
    }
    acc
}

/// The frequency grid `{−3π, −2π, −π, π/2, π, 2π, 3π}²`.
pub fn default_t_grid() -> Vec<(f64, f64)> {
    let ts = [-3.0 * PI, -2.0 * PI, -PI, 0.5 * PI, PI, 2.0 * PI, 3.0 * PI];
    ts.iter()
        .flat_map(|&t1| ts.iter().map(move |&t2| (t1, t2)))
        .filter(|&(t1, t2)| !(t1 == 0.0 && t2 == 0.0))
        .collect()
}

/// `max_t |ĵ(t₁, t₂) − μ̂(t₁ + t₂)|`, the distance between the characteristic
/// function of `j` and that of the diagonal lift of `mu`, with all mass at bin
/// centers.
pub fn char_function_gap(j: &Hist2D, mu: &DensityOnI, t_grid: &[(f64, f64)]) -> Result<f64> {
    same_shape(j.n_bins, mu.n_bins())?;
    if t_grid.is_empty() {
        return Err(Error::InputSize("empty frequency grid".into()));
    }
    let n = j.n_bins;
    let centers: Vec<f64> = (0..n).map(|i| bin_center(n, i)).collect();
    let mut worst: f64 = 0.0;
    for &(t1, t2) in t_grid {
        let (mut jr, mut ji) = (0.0, 0.0);
        for (i, row) in j.weights.chunks_exact(n).enumerate() {
            let (mut rr, mut ri) = (0.0, 0.0);
            for (k, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    let phase = t2 * centers[k];
                    rr += w * phase.cos();
                    ri += w * phase.sin();
                }
            }
            if rr == 0.0 && ri == 0.0 {
                continue;
            }
            let (c, s) = ((t1 * centers[i]).cos(), (t1 * centers[i]).sin());
            jr += c * rr - s * ri;
            ji += c * ri + s * rr;
        }
        let (mut mr, mut mi) = (0.0, 0.0);
        for (i, &w) in mu.weights().iter().enumerate() {
            if w != 0.0 {
                let (c, s) = ((t1 * centers[i]).cos(), (t1 * centers[i]).sin());
                let (c2, s2) = ((t2 * centers[i]).cos(), (t2 * centers[i]).sin());
                mr += w * (c * c2 - s * s2);
                mi += w * (c * s2 + s * c2);
            }
        }
        worst = worst.max((jr - mr).hypot(ji - mi));
    }
    Ok(worst)
}
