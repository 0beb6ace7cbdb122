//! The transition kernel of the noisy slave chain, its Ulam discretization,
//! stationary densities and convergence-rate fits, plus the drift and
//! minorization certificates.
//!
//! With noise law `h` and coupling `k`, one step moves `y` to
//! `z = k ω + (1 − k) T₂(y)`, `ω ~ h`, so the kernel density is
//!
//! ```text
//! p_k(y, z) = (1/k) h((z − (1 − k) T₂(y)) / k) · 1_I((z − (1 − k) T₂(y)) / k)
//! ```
//!
//! and the forward operator acts on densities by `(L_k g)(z) = ∫ g(y) p_k(y, z) dy`.

mod drift;
mod minorization;

pub use drift::{
    drift_certificate, drift_mc_check, finite_v_moment, gamma_k, k_constant, lyapunov_v,
    weighted_tv, DriftCertificate, DriftMcReport, DriftMcRow, DRIFT_TOLERANCE,
};
pub use minorization::{
    k_star, largest_envelope, minorization_certificate, rate_bound, Envelope, KStar, KStarBranch,
    MinorizationCertificate, MinorizationOptions, NU_TILDE_W_POINTS,
};

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::density::{bin_edges, bin_index, bin_left, bin_width, DensityOnI};
use crate::error::{check_coupling, check_in_interval, Error, FitFailure, Result};
use crate::maps::QuadraticMap;
use crate::stochastic::{l1, normalized, power_iterate, FixedPoint, StochasticMatrix};

pub const DEFAULT_N_BINS: usize = 1024;
pub const DEFAULT_SAMPLES_PER_BIN: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Distances used by [`empirical_rate`] must lie in this window.
pub const RATE_WINDOW: (f64, f64) = (1e-10, 1e-2);
/// Row sums before normalization may deviate from one by at most this much.
const ASSEMBLY_TOLERANCE: f64 = 1e-8;

/// `p_k(y, z)` for a piecewise-constant noise density `h`.
pub fn kernel_density(t2: &QuadraticMap, h: &DensityOnI, k: f64, y: f64, z: f64) -> Result<f64> {
    if k == 0.0 {
        return Err(Error::Unsupported(
            "the kernel is a Dirac mass at k = 0".into(),
        ));
    }
    check_coupling(k, false)?;
    check_in_interval("y", y)?;
    check_in_interval("z", z)?;
    let x = (z - (1.0 - k) * t2.apply(y)) / k;
    if (-1.0..=1.0).contains(&x) {
        Ok(h.value_at(x) / k)
    } else {
        Ok(0.0)
    }
}

/// Row-stochastic discretization of `L_k` on a uniform partition.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    pub matrix: StochasticMatrix,
    pub k: f64,
    pub c2: f64,
    /// Content hash of the noise density the operator was built from.
    pub h_hash: String,
}

impl UlamOperator {
    pub fn n_bins(&self) -> usize {
        self.matrix.n()
    }

    pub fn apply(&self, f: &DensityOnI) -> Result<DensityOnI> {
        self.matrix.apply_density(f)
    }

    /// Header line of the text layout.
    pub fn header_line(&self) -> String {
        format!(
            "# ulam v1 n_bins={} k={} c2={} h={}",
            self.n_bins(),
            self.k,
            self.c2,
            self.h_hash
        )
    }

    /// Writes the header line, any extra `#` comment lines, then one
    /// comma-separated line per matrix row.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        extra_comments: &[String],
    ) -> std::io::Result<()> {
        writeln!(out, "{}", self.header_line())?;
        for c in extra_comments {
            writeln!(out, "# {c}")?;
        }
        let n = self.n_bins();
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for (j, v) in self.matrix.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the layout produced by [`UlamOperator::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let bad = |msg: String| Error::InputSize(format!("ulam layout: {msg}"));
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let fields = header
            .strip_prefix("# ulam v1 ")
            .ok_or_else(|| bad(format!("unrecognized header `{header}`")))?;
        let (mut n, mut k, mut c2, mut h_hash) = (None, None, None, None);
        for field in fields.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed field `{field}`")))?;
            let parse_f = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
            match key {
                "n_bins" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "k" => k = Some(parse_f(value)?),
                "c2" => c2 = Some(parse_f(value)?),
                "h" => h_hash = Some(value.to_string()),
                other => return Err(bad(format!("unknown field `{other}`"))),
            }
        }
        let n = n.ok_or_else(|| bad("missing n_bins".into()))?;
        let mut rows = Vec::with_capacity(n * n);
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            for v in line.split(',') {
                rows.push(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?);
            }
        }
        Ok(Self {
            matrix: StochasticMatrix::from_rows(n, rows, crate::stochastic::ROW_SUM_TOLERANCE)?,
            k: k.ok_or_else(|| bad("missing k".into()))?,
            c2: c2.ok_or_else(|| bad("missing c2".into()))?,
            h_hash: h_hash.ok_or_else(|| bad("missing h".into()))?,
        })
    }
}

/// Adds the image of the noise density under `ω ↦ kω + shift`, scaled by
/// `weight`, to `row` by exact interval overlap of each affinely mapped
/// h-bin with the target partition.
fn push_forward_noise(row: &mut [f64], h: &DensityOnI, k: f64, shift: f64, weight: f64) {
    let n = row.len();
    let hn = h.n_bins();
    let image_len = k * bin_width(hn);
    for (m, &mass) in h.weights().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let (x0, x1) = bin_edges(hn, m);
        let (lo, hi) = (k * x0 + shift, k * x1 + shift);
        let first = bin_index(n, lo);
        let last = bin_index(n, hi);
        if first == last {
            row[first] += weight * mass;
            continue;
        }
        for (j, cell) in row.iter_mut().enumerate().take(last + 1).skip(first) {
            let (z0, z1) = (bin_left(n, j), bin_left(n, j + 1));
            let overlap = hi.min(z1) - lo.max(z0);
            if overlap > 0.0 {
                *cell += weight * mass * overlap / image_len;
            }
        }
    }
}

/// Assembles the Ulam matrix of `L_k`. Row `i` averages the exact image
/// measures of `samples_per_bin` equispaced nodes of source bin `i`.
pub fn build_ulam(
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    n_bins: usize,
    samples_per_bin: usize,
) -> Result<UlamOperator> {
    check_coupling(k, false)?;
    if n_bins < 16 {
        return Err(Error::InputSize(format!(
            "n_bins = {n_bins}, need at least 16"
        )));
    }
    if samples_per_bin == 0 {
        return Err(Error::InputSize("samples_per_bin must be positive".into()));
    }
    let width = bin_width(n_bins);
    let node_weight = 1.0 / samples_per_bin as f64;
    let mut rows = vec![0.0; n_bins * n_bins];
    rows.par_chunks_exact_mut(n_bins)
        .enumerate()
        .for_each(|(i, row)| {
            let left = bin_left(n_bins, i);
            for s in 0..samples_per_bin {
                let y = left + (s as f64 + 0.5) * width / samples_per_bin as f64;
                push_forward_noise(row, h, k, (1.0 - k) * t2.apply(y), node_weight);
            }
        });
    for (i, row) in rows.chunks_exact_mut(n_bins).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ASSEMBLY_TOLERANCE {
            return Err(Error::Assembly { row: i, sum });
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(UlamOperator {
        matrix: StochasticMatrix::from_rows(n_bins, rows, crate::stochastic::ROW_SUM_TOLERANCE)?,
        k,
        c2: t2.c(),
        h_hash: h.content_hash(),
    })
}

/// Fixed density `g` of the operator by power iteration from `f0`.
pub fn stationary_density(
    op: &UlamOperator,
    f0: &DensityOnI,
    max_iter: usize,
    tol: f64,
) -> Result<FixedPoint> {
    power_iterate(&op.matrix, f0, max_iter, tol)
}

/// L1 distances `‖L^n f0 − g‖` for `n = 0..=n_steps`.
pub fn convergence_trace(
    op: &UlamOperator,
    f0: &DensityOnI,
    g: &DensityOnI,
    n_steps: usize,
) -> Result<Vec<f64>> {
    for d in [f0, g] {
        if d.n_bins() != op.n_bins() {
            return Err(Error::Shape {
                left: d.n_bins(),
                right: op.n_bins(),
            });
        }
    }
    let mut f = f0.weights().to_vec();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(l1(&f, g.weights()));
    for _ in 0..n_steps {
        f = normalized(op.matrix.apply(&f));
        out.push(l1(&f, g.weights()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RateFit {
    /// `e^slope`, the fitted per-step contraction factor.
    pub rate: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive step range used by the fit.
    pub window: (usize, usize),
    pub distances: Vec<f64>,
}

/// Least-squares fit of `log ‖L^n f0 − g‖` against `n` over the steps whose
/// distance lies in [`RATE_WINDOW`].
pub fn empirical_rate(
    op: &UlamOperator,
    f0: &DensityOnI,
    g: &DensityOnI,
    n_steps: usize,
) -> Result<RateFit> {
    let distances = convergence_trace(op, f0, g, n_steps)?;
    fit_geometric_rate(distances)
}

/// Fits the first contiguous run of distances inside [`RATE_WINDOW`].
pub fn fit_geometric_rate(distances: Vec<f64>) -> Result<RateFit> {
    let (lo, hi) = RATE_WINDOW;
    let inside = |d: f64| d >= lo && d <= hi;
    let start = distances.iter().position(|&d| inside(d));
    let window = start.map(|s| {
        let len = distances[s..].iter().take_while(|&&d| inside(d)).count();
        (s, s + len - 1)
    });
    let min_distance = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    let (a, b) = match window {
        Some((a, b)) if b >= a + 2 => (a, b),
        _ => {
            let failure = if min_distance < lo {
                FitFailure::TooFast
            } else {
                FitFailure::TooSlow
            };
            return Err(Error::FitWindow {
                failure,
                min_distance,
                max_distance,
            });
        }
    };
    let pts: Vec<(f64, f64)> = (a..=b).map(|n| (n as f64, distances[n].ln())).collect();
    let (slope, intercept, r_squared) = least_squares(&pts);
    Ok(RateFit {
        rate: slope.exp(),
        slope,
        intercept,
        r_squared,
        window: (a, b),
        distances,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns
/// `(slope, intercept, r²)` with `r² = 1` for an exactly constant response.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}
