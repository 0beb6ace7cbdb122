//! Orbits of the master–slave system
//!
//! ```text
//! x_{n+1} = T₁(x_n)
//! y_{n+1} = (1 − k) T₂(y_n) + k T₁(x_n)
//! ```
//!
//! and of its random counterpart, where the drive `T₁(x_n)` is replaced by
//! i.i.d. draws `ω_n` from the master's invariant law:
//!
//! ```text
//! Y_{n+1} = (1 − k) T₂(Y_n) + k ω_n
//! ```
//!
//! Also the diagnostics computed on those orbits: empirical measures,
//! conditional slave laws, the transverse Lyapunov sum and the
//! synchronization error.

use rand::Rng;

use crate::density::{bin_index, bin_left, bin_width, DensityOnI};
use crate::error::{check_coupling, check_in_interval, Error, Result};
use crate::maps::QuadraticMap;
use crate::measures::Hist2D;
use crate::rng::{seeded, LabRng};

/// Minimum number of visits to an x-bin before its conditional slave law is
/// reported.
pub const MIN_CONDITIONAL_VISITS: usize = 100;
/// Floor inside the logarithm of the transverse Lyapunov sum.
pub const DEFAULT_LOG_CLIP: f64 = 1e-300;

/// One slave step. The result is clamped to `I` so that a last-ulp overshoot
/// of the convex combination cannot leave the interval.
#[inline]
fn slave_step(t2: &QuadraticMap, k: f64, y: f64, drive: f64) -> f64 {
    ((1.0 - k) * t2.apply(y) + k * drive).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOrbit {
    pub t1: QuadraticMap,
    pub t2: QuadraticMap,
    pub k: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl CoupledOrbit {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Recomputes every step and reports the first index that does not match.
    pub fn first_inconsistency(&self) -> Option<usize> {
        (0..self.len().saturating_sub(1)).find(|&i| {
            let x = self.t1.apply(self.xs[i]);
            let y = slave_step(&self.t2, self.k, self.ys[i], x);
            x != self.xs[i + 1] || y != self.ys[i + 1]
        })
    }
}

/// Runs the coupled system for `n` points starting at `(x0, y0)`.
pub fn simulate_coupled(
    t1: &QuadraticMap,
    t2: &QuadraticMap,
    k: f64,
    x0: f64,
    y0: f64,
    n: usize,
) -> Result<CoupledOrbit> {
    check_coupling(k, true)?;
    check_in_interval("x0", x0)?;
    check_in_interval("y0", y0)?;
    if n == 0 {
        return Err(Error::InputSize("orbit length must be at least 1".into()));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let (mut x, mut y) = (x0, y0);
    xs.push(x);
    ys.push(y);
    for _ in 1..n {
        let drive = t1.apply(x);
        y = slave_step(t2, k, y, drive);
        x = drive;
        xs.push(x);
        ys.push(y);
    }
    Ok(CoupledOrbit {
        t1: *t1,
        t2: *t2,
        k,
        xs,
        ys,
    })
}

/// Inverse-CDF sampler for a histogram density, uniform inside the chosen bin.
#[derive(Debug, Clone)]
pub struct HistogramSampler {
    n_bins: usize,
    cdf: Vec<f64>,
    last_positive: usize,
}

impl HistogramSampler {
    pub fn new(mu: &DensityOnI) -> Self {
        let (_, last_positive) = mu.support_bins();
        Self {
            n_bins: mu.n_bins(),
            cdf: mu.cdf(),
            last_positive,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.last_positive);
        let jitter: f64 = rng.random();
        bin_left(self.n_bins, j) + jitter * bin_width(self.n_bins)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub k: f64,
    pub ys: Vec<f64>,
    pub seed: u64,
}

/// Noise stream used by [`simulate_chain`]; exposed so paths can be replayed.
pub fn chain_noise(mu: &DensityOnI, seed: u64) -> impl Iterator<Item = f64> {
    let sampler = HistogramSampler::new(mu);
    let mut rng: LabRng = seeded(seed, 0);
    std::iter::repeat_with(move || sampler.sample(&mut rng))
}

/// Runs the random chain for `n` points from `y0` with noise law `mu`.
pub fn simulate_chain(
    t2: &QuadraticMap,
    mu: &DensityOnI,
    k: f64,
    y0: f64,
    n: usize,
    seed: u64,
) -> Result<ChainPath> {
    if k == 0.0 {
        return Err(Error::Unsupported(
            "k = 0 has no noise; use the coupled system instead".into(),
        ));
    }
    check_coupling(k, false)?;
    check_in_interval("y0", y0)?;
    if n == 0 {
        return Err(Error::InputSize("path length must be at least 1".into()));
    }
    let mut ys = Vec::with_capacity(n);
    let mut y = y0;
    ys.push(y);
    for omega in chain_noise(mu, seed).take(n - 1) {
        y = slave_step(t2, k, y, omega);
        ys.push(y);
    }
    Ok(ChainPath { k, ys, seed })
}

/// `(μ_n, ν_n, ρ_n)`: histograms of the master orbit, of the slave orbit and
/// of the simultaneous pairs `(x_i, y_i)`.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasures {
    pub master: DensityOnI,
    pub slave: DensityOnI,
    pub joint: Hist2D,
}

pub fn empirical_measures(o: &CoupledOrbit, n_bins: usize) -> Result<EmpiricalMeasures> {
    empirical_measures_after(o, n_bins, 0)
}

/// As [`empirical_measures`], skipping the first `burn_in` points.
pub fn empirical_measures_after(
    o: &CoupledOrbit,
    n_bins: usize,
    burn_in: usize,
) -> Result<EmpiricalMeasures> {
    if burn_in >= o.len() {
        return Err(Error::InputSize(format!(
            "burn-in {burn_in} leaves no points of an orbit of length {}",
            o.len()
        )));
    }
    let mut joint = vec![0u64; n_bins * n_bins];
    for (&x, &y) in o.xs[burn_in..].iter().zip(&o.ys[burn_in..]) {
        joint[bin_index(n_bins, x) * n_bins + bin_index(n_bins, y)] += 1;
    }
    let joint = Hist2D::from_counts(n_bins, &joint)?;
    Ok(EmpiricalMeasures {
        master: joint.marginal_x()?,
        slave: joint.marginal_y()?,
        joint,
    })
}

/// Slave histogram over the times the master sits in `x_bin`.
pub fn conditional_slave(o: &CoupledOrbit, n_bins: usize, x_bin: usize) -> Result<DensityOnI> {
    if x_bin >= n_bins {
        return Err(Error::InputSize(format!("x-bin {x_bin} of {n_bins}")));
    }
    let mut counts = vec![0u64; n_bins];
    let mut visits = 0;
    for (&x, &y) in o.xs.iter().zip(&o.ys) {
        if bin_index(n_bins, x) == x_bin {
            counts[bin_index(n_bins, y)] += 1;
            visits += 1;
        }
    }
    if visits < MIN_CONDITIONAL_VISITS {
        return Err(Error::InsufficientVisits {
            bin: x_bin,
            visits,
            required: MIN_CONDITIONAL_VISITS,
        });
    }
    DensityOnI::from_counts(&counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    /// Terms where `|T₂'(y_i)|` fell below the clip and was replaced by it.
    pub clipped: usize,
    pub n: usize,
}

/// `(1/n) Σ log max(|T₂'(y_i)|, clip)` over the slave orbit.
pub fn transverse_lyapunov(o: &CoupledOrbit, clip: f64) -> Result<LyapunovEstimate> {
    lyapunov_trace(o, clip, &[o.len()]).map(|t| t[0])
}

/// Running transverse Lyapunov sums at the requested prefix lengths
/// (ascending, each in `1..=len`).
pub fn lyapunov_trace(
    o: &CoupledOrbit,
    clip: f64,
    checkpoints: &[usize],
) -> Result<Vec<LyapunovEstimate>> {
    if o.is_empty() {
        return Err(Error::InputSize("empty orbit".into()));
    }
    if !(clip > 0.0) {
        return Err(Error::domain("clip", clip, "(0, inf)"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.iter().any(|&c| c == 0 || c > o.len())
    {
        return Err(Error::InputSize(
            "checkpoints must be ascending within the orbit".into(),
        ));
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut sum, mut clipped) = (0.0, 0usize);
    let mut next = checkpoints.iter().peekable();
    for (i, &y) in o.ys.iter().enumerate() {
        let slope = o.t2.derivative(y).abs();
        if slope < clip {
            clipped += 1;
            sum += clip.ln();
        } else {
            sum += slope.ln();
        }
        if next.peek() == Some(&&(i + 1)) {
            next.next();
            out.push(LyapunovEstimate {
                value: sum / (i + 1) as f64,
                clipped,
                n: i + 1,
            });
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(out)
}

/// Mean of `|x_i − y_i|` over the last `tail` points.
pub fn sync_error(o: &CoupledOrbit, tail: usize) -> Result<f64> {
    if tail == 0 || tail > o.len() {
        return Err(Error::InputSize(format!(
            "tail {tail} for an orbit of length {}",
            o.len()
        )));
    }
    let start = o.len() - tail;
    let total: f64 = o.xs[start..]
        .iter()
        .zip(&o.ys[start..])
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(total / tail as f64)
}
