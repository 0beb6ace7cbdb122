//! The quadratic unimodal family `x ↦ c(1 − 2x²)` on `I = [-1, 1]`, orbits,
//! and three ways of obtaining the invariant density of the master map.

use std::f64::consts::PI;

use rand::Rng;

use crate::density::{bin_edges, bin_index, DensityOnI};
use crate::error::{check_in_interval, Error, Result};
use crate::rng::seeded;
use crate::stochastic::{power_iterate, StochasticMatrix};

/// Iterates discarded before an orbit histogram starts counting.
pub const ORBIT_BURN_IN: usize = 1_000;
/// Smallest orbit length accepted by the orbit-histogram provider.
pub const MIN_ORBIT_BUDGET: usize = 100_000;
/// L1 change below which the Ulam power iteration is considered converged.
pub const ULAM_TOLERANCE: f64 = 1e-10;

/// `x ↦ c(1 − 2x²)` with `c ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMap {
    c: f64,
}

impl QuadraticMap {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c <= 1.0 {
            Ok(Self { c })
        } else {
            Err(Error::domain("c", c, "(0, 1]"))
        }
    }

    #[inline]
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Map value without the domain check; used in hot loops on points that
    /// are already known to lie in `I`.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.c * (1.0 - 2.0 * x * x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_in_interval("x", x)?;
        Ok(self.apply(x))
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        -4.0 * self.c * x
    }

    /// `[T(c), c]`, the smallest interval containing every orbit after two
    /// iterates.
    pub fn core_interval(&self) -> (f64, f64) {
        (self.apply(self.c), self.c)
    }

    /// The fixed point in `(0, c)`, the positive root of `2c x² + x − c = 0`.
    pub fn fixed_point(&self) -> f64 {
        let c = self.c;
        (-1.0 + (1.0 + 8.0 * c * c).sqrt()) / (4.0 * c)
    }

    pub fn orbit(&self, x0: f64, n: usize) -> Result<Vec<f64>> {
        check_in_interval("x0", x0)?;
        if n == 0 {
            return Err(Error::InputSize("orbit length must be at least 1".into()));
        }
        let mut xs = Vec::with_capacity(n);
        let mut x = x0;
        xs.push(x);
        for _ in 1..n {
            x = self.apply(x);
            xs.push(x);
        }
        Ok(xs)
    }
}

/// Source of the master map's invariant density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityProvider {
    /// Closed-form arcsine law, valid for `c = 1` only.
    Analytic,
    /// Fixed density of the Ulam matrix; `budget` is the power-iteration cap.
    Ulam,
    /// Normalized visit histogram of one orbit; `budget` is its length.
    OrbitHistogram,
}

impl std::str::FromStr for DensityProvider {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "ulam" => Ok(Self::Ulam),
            "orbit-histogram" => Ok(Self::OrbitHistogram),
            other => Err(Error::Unsupported(format!("density provider `{other}`"))),
        }
    }
}

impl std::fmt::Display for DensityProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::Ulam => "ulam",
            Self::OrbitHistogram => "orbit-histogram",
        })
    }
}

/// Invariant density of `map` on an `n_bins` partition. `seed` picks the
/// starting point of the orbit-histogram provider and is ignored otherwise.
pub fn invariant_density(
    map: &QuadraticMap,
    provider: DensityProvider,
    n_bins: usize,
    budget: usize,
    seed: u64,
) -> Result<DensityOnI> {
    if n_bins == 0 {
        return Err(Error::InputSize("n_bins must be positive".into()));
    }
    match provider {
        DensityProvider::Analytic => arcsine_density(map, n_bins),
        DensityProvider::Ulam => {
            let p = map_ulam_matrix(map, n_bins)?;
            power_iterate(&p, &DensityOnI::uniform(n_bins), budget, ULAM_TOLERANCE)
                .map(|fp| fp.density)
        }
        DensityProvider::OrbitHistogram => orbit_histogram(map, n_bins, budget, seed),
    }
}

fn arcsine_density(map: &QuadraticMap, n_bins: usize) -> Result<DensityOnI> {
    if map.c() != 1.0 {
        return Err(Error::Unsupported(format!(
            "analytic invariant density needs c = 1, got c = {}",
            map.c()
        )));
    }
    // mass of [a, b) under dx / (π √(1 − x²))
    let masses = (0..n_bins)
        .map(|j| {
            let (a, b) = bin_edges(n_bins, j);
            (b.clamp(-1.0, 1.0).asin() - a.clamp(-1.0, 1.0).asin()) / PI
        })
        .collect();
    DensityOnI::from_masses(masses)
}

fn orbit_histogram(
    map: &QuadraticMap,
    n_bins: usize,
    budget: usize,
    seed: u64,
) -> Result<DensityOnI> {
    if budget < MIN_ORBIT_BUDGET {
        return Err(Error::InputSize(format!(
            "orbit-histogram budget {budget} is below {MIN_ORBIT_BUDGET}"
        )));
    }
    let mut rng = seeded(seed, 0);
    let mut counts = vec![0u64; n_bins];
    let mut x = rng.random_range(-1.0..1.0);
    let mut burn = ORBIT_BURN_IN;
    let mut counted = 0;
    while counted < budget {
        let next = map.apply(x);
        // An exact floating-point fixed point (e.g. -1 for c = 1) would absorb
        // the rest of the budget; restart from a fresh point instead.
        if next == x {
            x = rng.random_range(-1.0..1.0);
            burn = ORBIT_BURN_IN;
            continue;
        }
        x = next;
        if burn > 0 {
            burn -= 1;
            continue;
        }
        counts[bin_index(n_bins, x)] += 1;
        counted += 1;
    }
    DensityOnI::from_counts(&counts)
}

/// Exact Ulam matrix of a deterministic quadratic map: entry `(i, j)` is the
/// Lebesgue fraction of bin `i` mapped into bin `j`, computed from the
/// closed-form inverse branches.
pub fn map_ulam_matrix(map: &QuadraticMap, n_bins: usize) -> Result<StochasticMatrix> {
    let c = map.c();
    let mut rows = vec![0.0; n_bins * n_bins];
    for (i, row) in rows.chunks_exact_mut(n_bins).enumerate() {
        let (a, b) = bin_edges(n_bins, i);
        let pieces: &[(f64, f64)] = if a < 0.0 && b > 0.0 {
            &[(a, 0.0), (0.0, b)]
        } else {
            &[(a, b)]
        };
        for &(p, q) in pieces {
            let sign = if p >= 0.0 { 1.0 } else { -1.0 };
            let inverse = |z: f64| sign * ((1.0 - z / c) * 0.5).max(0.0).sqrt();
            let (zp, zq) = (map.apply(p), map.apply(q));
            let (lo, hi) = (zp.min(zq), zp.max(zq));
            #[allow(clippy::needless_range_loop)]
            for j in bin_index(n_bins, lo)..=bin_index(n_bins, hi) {
                let (z0, z1) = bin_edges(n_bins, j);
                let (zl, zh) = (z0.max(lo), z1.min(hi));
                if zh > zl {
                    row[j] += (inverse(zh) - inverse(zl)).abs();
                }
            }
        }
        let total: f64 = row.iter().sum();
        if (total - (b - a)).abs() > 1e-9 * (b - a) {
            return Err(Error::Assembly {
                row: i,
                sum: total / (b - a),
            });
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    StochasticMatrix::from_rows(n_bins, rows, 1e-10)
}
