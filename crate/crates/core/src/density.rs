//! Uniform partition of `I = [-1, 1]` and piecewise-constant probability
//! densities on it.
//!
//! Bin `j` of an `n`-bin partition covers `[-1 + 2j/n, -1 + 2(j+1)/n)`; the
//! last bin is closed on the right. Points on an interior edge belong to the
//! bin on their right.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`DensityOnI`].
pub const MASS_TOLERANCE: f64 = 1e-12;

#[inline]
pub fn bin_width(n_bins: usize) -> f64 {
    2.0 / n_bins as f64
}

#[inline]
pub fn bin_left(n_bins: usize, j: usize) -> f64 {
    -1.0 + 2.0 * j as f64 / n_bins as f64
}

#[inline]
pub fn bin_edges(n_bins: usize, j: usize) -> (f64, f64) {
    (bin_left(n_bins, j), bin_left(n_bins, j + 1))
}

#[inline]
pub fn bin_center(n_bins: usize, j: usize) -> f64 {
    -1.0 + (2 * j + 1) as f64 / n_bins as f64
}

/// Index of the bin containing `x`. Values outside `I` are clamped to the
/// first or last bin.
#[inline]
pub fn bin_index(n_bins: usize, x: f64) -> usize {
    let pos = ((x + 1.0) * 0.5 * n_bins as f64).floor();
    if pos <= 0.0 {
        0
    } else {
        (pos as usize).min(n_bins - 1)
    }
}

/// Probability mass per bin of a uniform partition of `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOnI {
    weights: Vec<f64>,
}

impl DensityOnI {
    /// Wraps `weights` after checking they are nonnegative and sum to one
    /// within [`MASS_TOLERANCE`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_masses(&weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Normalizes arbitrary nonnegative masses into a density.
    pub fn from_masses(mut masses: Vec<f64>) -> Result<Self> {
        validate_masses(&masses)?;
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity("total mass is zero".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(Self { weights: masses })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::from_masses(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn uniform(n_bins: usize) -> Self {
        assert!(n_bins > 0, "partition needs at least one bin");
        Self {
            weights: vec![1.0 / n_bins as f64; n_bins],
        }
    }

    pub fn point_mass(n_bins: usize, bin: usize) -> Self {
        assert!(bin < n_bins, "bin {bin} out of range for {n_bins} bins");
        let mut weights = vec![0.0; n_bins];
        weights[bin] = 1.0;
        Self { weights }
    }

    /// Uniform density on the bins whose centers fall in `[lo, hi]`.
    pub fn uniform_on(n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        let masses = (0..n_bins)
            .map(|j| {
                let c = bin_center(n_bins, j);
                if c >= lo && c <= hi {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_masses(masses)
    }

    /// Histogram of `points` with left-closed bins.
    pub fn histogram<'a, I>(n_bins: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a f64>,
    {
        let mut counts = vec![0u64; n_bins];
        for &x in points {
            counts[bin_index(n_bins, x)] += 1;
        }
        Self::from_counts(&counts)
    }

    #[inline]
    pub fn n_bins(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// Density value (mass divided by bin width) on bin `j`.
    #[inline]
    pub fn density_value(&self, j: usize) -> f64 {
        self.weights[j] * self.n_bins() as f64 * 0.5
    }

    /// Density value at `x`; zero outside `I`.
    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.density_value(bin_index(self.n_bins(), x))
    }

    /// Cumulative masses: entry `j` is the mass of bins `0..=j`.
    pub fn cdf(&self) -> Vec<f64> {
        self.weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }

    /// Smallest and largest bin index carrying positive mass.
    pub fn support_bins(&self) -> (usize, usize) {
        let lo = self.weights.iter().position(|&w| w > 0.0).unwrap_or(0);
        let hi = self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        (lo, hi)
    }

    /// Short hex digest of the weights, used to tag operators built from this
    /// density.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_bins() as u64).to_le_bytes());
        for w in &self.weights {
            hasher.update(w.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn from_raw_unchecked(weights: Vec<f64>) -> Self {
        Self { weights }
    }
}

fn validate_masses(masses: &[f64]) -> Result<()> {
    if masses.is_empty() {
        return Err(Error::InvalidDensity("no bins".into()));
    }
    if let Some((j, m)) = masses
        .iter()
        .enumerate()
        .find(|(_, m)| !m.is_finite() || **m < 0.0)
    {
        return Err(Error::InvalidDensity(format!("bin {j} has mass {m}")));
    }
    Ok(())
}
