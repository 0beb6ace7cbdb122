//! Lyapunov drift for the noisy slave chain.
//!
//! `V_k(x) = cosh(c₂^{1/k} (1 − c₂²) x / (1 − x²))` satisfies
//! `∫ p_k(y, z) V_k(z) dz ≤ γ_k V_k(y) + K_k` with
//! `γ_k = (1 − k) cosh(c₂^{1/k + 1})` and `K_k = k ∫ h V_k`.

use rayon::prelude::*;

use crate::density::{bin_center, bin_edges, DensityOnI};
use crate::dynamics::HistogramSampler;
use crate::error::{Error, Result};
use crate::maps::QuadraticMap;
use crate::rng::seeded;

/// Relative tolerance on drift residuals.
pub const DRIFT_TOLERANCE: f64 = 1e-6;
/// Gauss–Legendre nodes per noise bin for `∫ h V_k`.
pub const DEFAULT_NODES_PER_BIN: usize = 4;
const MC_CHUNK: usize = 1_000;
const MIN_MC_REPS: usize = 10_000;

fn check_open_unit(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, v, "(0, 1)"))
    }
}

/// Coefficient of `x / (1 − x²)` inside the cosh.
#[inline]
fn v_scale(c2: f64, k: f64) -> f64 {
    c2.powf(1.0 / k) * (1.0 - c2 * c2)
}

#[inline]
fn v_unchecked(scale: f64, x: f64) -> f64 {
    (scale * x / (1.0 - x * x)).cosh()
}

pub fn lyapunov_v(c2: f64, k: f64, x: f64) -> Result<f64> {
    check_open_unit("c2", c2)?;
    check_open_unit("k", k)?;
    if !(x.abs() < 1.0 - 1e-12) {
        return Err(Error::domain("x", x, "(-1, 1)"));
    }
    Ok(v_unchecked(v_scale(c2, k), x))
}

pub fn gamma_k(c2: f64, k: f64) -> f64 {
    (1.0 - k) * c2.powf(1.0 / k + 1.0).cosh()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Quadrature nodes `(x, mass)` for integrals against the piecewise-constant
/// density `h`. Fails when `h` charges a boundary bin, where `V_k` blows up.
fn noise_nodes(h: &DensityOnI, nodes_per_bin: usize) -> Result<Vec<(f64, f64)>> {
    let n = h.n_bins();
    let w = h.weights();
    if w[0] > 0.0 || w[n - 1] > 0.0 {
        return Err(Error::Unsupported(
            "noise density charges a boundary bin of I (e.g. c1 = 1); K_k diverges".into(),
        ));
    }
    let rule = gauss_legendre(nodes_per_bin.max(1));
    let mut nodes = Vec::new();
    for (j, &mass) in w.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let (a, b) = bin_edges(n, j);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        nodes.extend(
            rule.iter()
                .map(|&(t, wt)| (mid + half * t, mass * wt * 0.5)),
        );
    }
    Ok(nodes)
}

/// `K_k = k ∫ h V_k`.
pub fn k_constant(h: &DensityOnI, c2: f64, k: f64) -> Result<f64> {
    check_open_unit("c2", c2)?;
    check_open_unit("k", k)?;
    let scale = v_scale(c2, k);
    Ok(k * noise_nodes(h, DEFAULT_NODES_PER_BIN)?
        .iter()
        .map(|&(x, m)| m * v_unchecked(scale, x))
        .sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct DriftCertificate {
    pub k: f64,
    pub gamma_k: f64,
    pub k_const: f64,
    pub y_grid: Vec<f64>,
    /// `∫ p_k(y, ·) V_k − (γ_k V_k(y) + K_k)` at each grid point.
    pub residuals: Vec<f64>,
    /// Per-point tolerance `DRIFT_TOLERANCE · (γ_k V_k(y) + K_k)`.
    pub tolerances: Vec<f64>,
    pub valid: bool,
}

impl DriftCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn drift_certificate(
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    y_grid: &[f64],
) -> Result<DriftCertificate> {
    drift_certificate_with_nodes(t2, h, k, y_grid, DEFAULT_NODES_PER_BIN)
}

/// Checks the drift inequality on `y_grid`. Both `K_k` and the left-hand side
/// use the same noise quadrature nodes, so convexity of `V_k` carries over to
/// the discrete sums.
pub fn drift_certificate_with_nodes(
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    y_grid: &[f64],
    nodes_per_bin: usize,
) -> Result<DriftCertificate> {
    let c2 = t2.c();
    check_open_unit("c2", c2)?;
    check_open_unit("k", k)?;
    let nodes = noise_nodes(h, nodes_per_bin)?;
    let scale = v_scale(c2, k);
    let gamma = gamma_k(c2, k);
    let k_const = k * nodes
        .iter()
        .map(|&(x, m)| m * v_unchecked(scale, x))
        .sum::<f64>();
    let mut residuals = Vec::with_capacity(y_grid.len());
    let mut tolerances = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        let vy = lyapunov_v(c2, k, y)?;
        let shift = (1.0 - k) * t2.apply(y);
        let lhs: f64 = nodes
            .iter()
            .map(|&(x, m)| m * v_unchecked(scale, k * x + shift))
            .sum();
        let rhs = gamma * vy + k_const;
        residuals.push(lhs - rhs);
        tolerances.push(DRIFT_TOLERANCE * rhs);
    }
    let valid = residuals.iter().zip(&tolerances).all(|(r, t)| r <= t);
    Ok(DriftCertificate {
        k,
        gamma_k: gamma,
        k_const,
        y_grid: y_grid.to_vec(),
        residuals,
        tolerances,
        valid,
    })
}

fn check_interior(d: &DensityOnI) -> Result<()> {
    let n = d.n_bins();
    if d.weights()[0] > 0.0 || d.weights()[n - 1] > 0.0 {
        return Err(Error::domain(
            "boundary-bin mass",
            d.weights()[0].max(d.weights()[n - 1]),
            "{0}",
        ));
    }
    Ok(())
}

/// `d_β(a, b) = Σ_j [1 + β(V_k(center_j) − 1)] |a_j − b_j|`.
pub fn weighted_tv(a: &DensityOnI, b: &DensityOnI, c2: f64, k: f64, beta: f64) -> Result<f64> {
    if a.n_bins() != b.n_bins() {
        return Err(Error::Shape {
            left: a.n_bins(),
            right: b.n_bins(),
        });
    }
    if !(beta > 0.0) {
        return Err(Error::domain("beta", beta, "(0, inf)"));
    }
    check_interior(a)?;
    check_interior(b)?;
    let n = a.n_bins();
    let mut acc = 0.0;
    for (j, (x, y)) in a.weights().iter().zip(b.weights()).enumerate() {
        let diff = (x - y).abs();
        if diff != 0.0 {
            acc += (1.0 + beta * (lyapunov_v(c2, k, bin_center(n, j))? - 1.0)) * diff;
        }
    }
    Ok(acc)
}

/// `∫ f V_k` on bin centers, or `None` when `f` charges a boundary bin.
pub fn finite_v_moment(f: &DensityOnI, c2: f64, k: f64) -> Result<Option<f64>> {
    if check_interior(f).is_err() {
        return Ok(None);
    }
    let n = f.n_bins();
    let mut acc = 0.0;
    for (j, &w) in f.weights().iter().enumerate() {
        if w != 0.0 {
            acc += w * lyapunov_v(c2, k, bin_center(n, j))?;
        }
    }
    Ok(Some(acc))
}

#[derive(Debug, Clone, Copy)]
pub struct DriftMcRow {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `K_k (1 − γ_k^{n+1}) / (1 − γ_k) + γ_k^n V_k(y0)`.
    pub bound: f64,
}

impl DriftMcRow {
    pub fn pass(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.std_error
    }
}

#[derive(Debug, Clone)]
pub struct DriftMcReport {
    pub gamma_k: f64,
    pub k_const: f64,
    pub rows: Vec<DriftMcRow>,
    pub pass: bool,
}

/// Monte Carlo check of the iterated drift bound for `n = 0..=steps`.
pub fn drift_mc_check(
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    y0: f64,
    steps: usize,
    reps: usize,
    seed: u64,
) -> Result<DriftMcReport> {
    let c2 = t2.c();
    if reps < MIN_MC_REPS {
        return Err(Error::InputSize(format!(
            "{reps} replicas, need at least {MIN_MC_REPS}"
        )));
    }
    let v0 = lyapunov_v(c2, k, y0)?;
    let gamma = gamma_k(c2, k);
    let k_const = k_constant(h, c2, k)?;
    let scale = v_scale(c2, k);
    let sampler = HistogramSampler::new(h);

    let n_chunks = reps.div_ceil(MC_CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = seeded(seed, chunk as u64);
            let count = MC_CHUNK.min(reps - chunk * MC_CHUNK);
            let mut sum = vec![0.0; steps + 1];
            let mut sum_sq = vec![0.0; steps + 1];
            for _ in 0..count {
                let mut y = y0;
                for n in 0..=steps {
                    if n > 0 {
                        let omega = sampler.sample(&mut rng);
                        y = (1.0 - k) * t2.apply(y) + k * omega;
                    }
                    let v = v_unchecked(scale, y);
                    sum[n] += v;
                    sum_sq[n] += v * v;
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; steps + 1];
    let mut sum_sq = vec![0.0; steps + 1];
    for (s, q) in &partial {
        sum.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(q).for_each(|(a, b)| *a += b);
    }
    let r = reps as f64;
    let rows: Vec<DriftMcRow> = (0..=steps)
        .map(|n| {
            let mean = sum[n] / r;
            let var = ((sum_sq[n] / r - mean * mean) * r / (r - 1.0)).max(0.0);
            DriftMcRow {
                n,
                mean,
                std_error: (var / r).sqrt(),
                bound: k_const * (1.0 - gamma.powi(n as i32 + 1)) / (1.0 - gamma)
                    + gamma.powi(n as i32) * v0,
            }
        })
        .collect();
    let pass = rows.iter().all(DriftMcRow::pass);
    Ok(DriftMcReport {
        gamma_k: gamma,
        k_const,
        rows,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_h(n: usize) -> DensityOnI {
        DensityOnI::from_masses(
            (0..n)
                .map(|j| {
                    let x = bin_center(n, j);
                    if x > -0.55 && x < 0.9 {
                        1.0 + 0.5 * (5.0 * x).sin()
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=6 {
            let rule = gauss_legendre(n);
            let total: f64 = rule.iter().map(|p| p.1).sum();
            assert!((total - 2.0).abs() < 1e-13);
            // exact for degree 2n − 1
            let deg = 2 * n - 1;
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let expected = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((got - expected).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn v_examples() {
        assert_eq!(lyapunov_v(0.5, 0.5, 0.0).unwrap(), 1.0);
        let v = lyapunov_v(0.5, 0.5, 0.5).unwrap();
        assert!((v - 0.125f64.cosh()).abs() < 1e-15);
        assert!(lyapunov_v(0.5, 0.5, 1.0).is_err());
        assert!(lyapunov_v(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn gamma_example_and_series_oracle() {
        // cosh(0.125) by its Taylor series
        let x: f64 = 0.125;
        let mut term = 1.0;
        let mut series = 0.0;
        for m in 0..10 {
            series += term;
            term *= x * x / ((2 * m + 1) * (2 * m + 2)) as f64;
        }
        assert!((series - 1.007822).abs() < 1e-6);
        assert!((gamma_k(0.5, 0.5) - 0.5 * series).abs() < 1e-15);
    }

    #[test]
    fn gamma_is_nonincreasing_in_k() {
        for &c2 in &[0.3, 0.5, 0.9] {
            let mut prev = f64::INFINITY;
            for i in 1..1000 {
                let g = gamma_k(c2, i as f64 / 1000.0);
                assert!(g > 0.0 && g < 1.0);
                assert!(g <= prev + 1e-15);
                prev = g;
            }
        }
    }

    #[test]
    fn drift_holds_on_grid() {
        let h = interior_h(256);
        let t2 = QuadraticMap::new(0.7).unwrap();
        let grid: Vec<f64> = (0..101).map(|i| -0.98 + 1.96 * i as f64 / 100.0).collect();
        for &k in &[0.1, 0.5, 0.95] {
            let cert = drift_certificate(&t2, &h, k, &grid).unwrap();
            assert!(cert.valid, "k={k}: max residual {}", cert.max_residual());
        }
    }

    #[test]
    fn boundary_mass_is_rejected() {
        let t2 = QuadraticMap::new(0.7).unwrap();
        let h = DensityOnI::uniform(64);
        assert!(matches!(
            drift_certificate(&t2, &h, 0.5, &[0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn weighted_tv_limits() {
        let n = 64;
        let a = interior_h(n);
        let b = DensityOnI::uniform_on(n, -0.5, 0.5).unwrap();
        assert_eq!(weighted_tv(&a, &a, 0.5, 0.5, 1.0).unwrap(), 0.0);
        let d = weighted_tv(&a, &b, 0.5, 0.5, 1e-12).unwrap();
        let tv = crate::measures::tv_distance(&a, &b).unwrap();
        assert!((d / 2.0 - tv).abs() < 1e-9);
        assert!(weighted_tv(&a, &DensityOnI::uniform(n), 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn v_moment_membership() {
        let n = 64;
        assert!(finite_v_moment(&interior_h(n), 0.5, 0.5).unwrap().is_some());
        assert!(finite_v_moment(&DensityOnI::uniform(n), 0.5, 0.5)
            .unwrap()
            .is_none());
    }

    #[test]
    fn mc_step_zero_is_trivial() {
        let h = interior_h(128);
        let t2 = QuadraticMap::new(0.5).unwrap();
        let rep = drift_mc_check(&t2, &h, 0.5, 0.3, 3, 10_000, 1).unwrap();
        let r0 = rep.rows[0];
        assert_eq!(r0.std_error, 0.0);
        assert!(r0.mean <= r0.bound);
        assert!(rep.pass);
        assert!(drift_mc_check(&t2, &h, 0.5, 0.3, 3, 100, 1).is_err());
    }

    #[test]
    fn mc_is_reproducible() {
        let h = interior_h(128);
        let t2 = QuadraticMap::new(0.5).unwrap();
        let a = drift_mc_check(&t2, &h, 0.9, 0.5, 5, 10_000, 9).unwrap();
        let b = drift_mc_check(&t2, &h, 0.9, 0.5, 5, 10_000, 9).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.mean, y.mean);
        }
    }
}
