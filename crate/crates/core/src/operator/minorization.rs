//! Doeblin-type minorization of the slave kernel and the explicit geometric
//! rate it yields together with the drift bound.
//!
//! A lower envelope `ψ₀ = c·1_{[a₀,b₀]} ≤ h` gives, for every `y` and every
//! interval `A`,
//!
//! ```text
//! p_k(y, A) ≥ ∫ ψ₀(x) 1_A(kx + (1 − k)T₂(y)) dx ≥ α_k ν̃(A),   α_k = ‖ψ₀‖₁
//! ν̃(A) = inf_{w ∈ [−c₂, c₂]} ∫ ψ₀(x) 1_A(kx + (1 − k)w) dx / α_k
//! ```
//!
//! and for `ᾱ ∈ (0, α_k)`, `R > 2K_k/(1 − γ_k)` the contraction rate in the
//! weighted metric `d_{ᾱ/K_k}` is
//!
//! ```text
//! ᾱ_k = max( 1 − (α_k − ᾱ),  (2 + R(ᾱ/K_k)(γ_k + 2K_k/R)) / (2 + Rᾱ/K_k) ).
//! ```

use crate::density::{bin_edges, bin_width, DensityOnI};
use crate::error::{check_coupling, Error, Result};
use crate::maps::QuadraticMap;

use super::drift::{gamma_k, k_constant};

/// Number of `w` values used for the infimum defining `ν̃`.
pub const NU_TILDE_W_POINTS: usize = 1024;
const MIN_ALPHA: f64 = 1e-6;

/// Largest rectangle `c·1_{[a0,b0]}` under the histogram of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub a0: f64,
    pub b0: f64,
    pub height: f64,
    pub alpha: f64,
    pub first_bin: usize,
    pub last_bin: usize,
}

impl Envelope {
    /// Bin masses of `ψ₀` (a subprobability vector).
    pub fn masses(&self, n_bins: usize) -> Vec<f64> {
        let w = bin_width(n_bins);
        (0..n_bins)
            .map(|j| {
                if j >= self.first_bin && j <= self.last_bin {
                    self.height * w
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Maximal-area rectangle under the density values of `h`, shrunk in height
/// by `(1 − margin)` so that the envelope sits strictly below `h`.
pub fn largest_envelope(h: &DensityOnI, margin: f64) -> Result<Envelope> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::domain("margin", margin, "(0, 1)"));
    }
    let n = h.n_bins();
    let heights: Vec<f64> = (0..n).map(|j| h.density_value(j)).collect();
    // classic stack sweep; (area, first, last, min height)
    let mut best = (0.0, 0, 0, 0.0);
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    for i in 0..=n {
        let cur = if i < n { heights[i] } else { -1.0 };
        while let Some(&top) = stack.last() {
            if heights[top] <= cur {
                break;
            }
            stack.pop();
            let first = stack.last().map_or(0, |&s| s + 1);
            let area = heights[top] * (i - first) as f64;
            if area > best.0 {
                best = (area, first, i - 1, heights[top]);
            }
        }
        stack.push(i.min(n - 1));
        if i == n {
            break;
        }
    }
    let (_, first, last, min_height) = best;
    let height = (1.0 - margin) * min_height;
    let a0 = bin_edges(n, first).0;
    let b0 = bin_edges(n, last).1;
    Ok(Envelope {
        a0,
        b0,
        height,
        alpha: height * (b0 - a0),
        first_bin: first,
        last_bin: last,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KStarBranch {
    /// `a₀ > c₂`: `k_* = (1 − c₂)/(a₀ − c₂) ∨ 1`.
    AboveC2,
    /// `b₀ < −c₂`: `k_* = (1 − c₂)/|b₀ + c₂| ∨ 1`.
    BelowMinusC2,
    /// `a₀ < c₂`, `b₀ > −c₂`: `k_* = 1`.
    Straddles,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStar {
    pub branch: KStarBranch,
    /// Value of the branch expression before the `∨ 1` and the clamp.
    pub raw: f64,
    /// Threshold actually used, in `(0, 1]`.
    pub value: f64,
}

/// Coupling threshold below which the minorization is certified, from the
/// support `[a0, b0]` of the envelope and the slave parameter `c2`.
pub fn k_star(a0: f64, b0: f64, c2: f64) -> KStar {
    let (branch, raw) = if a0 >= c2 {
        (KStarBranch::AboveC2, (1.0 - c2) / (a0 - c2))
    } else if b0 <= -c2 {
        (KStarBranch::BelowMinusC2, (1.0 - c2) / (b0 + c2).abs())
    } else {
        (KStarBranch::Straddles, 1.0)
    };
    // `∨ 1` then the clamp to (0, 1], kept as written even though it is constant
    #[allow(clippy::min_max, clippy::manual_clamp)]
    let value = if branch == KStarBranch::Straddles {
        1.0
    } else {
        raw.max(1.0).min(1.0)
    };
    KStar { branch, raw, value }
}

/// `ᾱ_k` for the given minorization mass, `ᾱ`, drift constants and `R`.
pub fn rate_bound(alpha: f64, alpha_bar: f64, gamma: f64, k_const: f64, r: f64) -> f64 {
    let doeblin = 1.0 - (alpha - alpha_bar);
    let beta_r = r * alpha_bar / k_const;
    let drift = (2.0 + beta_r * (gamma + 2.0 * k_const / r)) / (2.0 + beta_r);
    doeblin.max(drift)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorizationOptions {
    /// Relative shrink of the envelope height below `h`.
    pub margin: f64,
    /// `ᾱ = alpha_bar_frac · α_k`.
    pub alpha_bar_frac: f64,
    /// `R = r_frac · 2K_k / (1 − γ_k)`.
    pub r_frac: f64,
}

impl Default for MinorizationOptions {
    fn default() -> Self {
        Self {
            margin: 0.05,
            alpha_bar_frac: 0.5,
            r_frac: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizedRate {
    pub value: f64,
    pub alpha_bar_frac: f64,
    pub r_frac: f64,
}

#[derive(Debug, Clone)]
pub struct MinorizationCertificate {
    pub k: f64,
    pub envelope: Envelope,
    /// Bin masses of `ψ₀`.
    pub psi0: Vec<f64>,
    pub alpha_k: f64,
    /// `ν̃` of each z-bin, before normalization.
    pub nu_tilde_raw: Vec<f64>,
    /// Total mass of `nu_tilde_raw`; `α_k` times this is the one-step
    /// minorization mass the envelope actually delivers.
    pub nu_tilde_mass: f64,
    /// `ν̃` renormalized for reporting; `None` when it carries no mass.
    pub nu_tilde: Option<DensityOnI>,
    pub k_star: KStar,
    pub gamma_k: f64,
    pub k_const: f64,
    pub r: f64,
    pub alpha_bar: f64,
    pub rate_bound: f64,
    pub min_rate_bound: MinimizedRate,
}

pub fn minorization_certificate(
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    opts: &MinorizationOptions,
) -> Result<MinorizationCertificate> {
    check_coupling(k, false)?;
    if !(opts.alpha_bar_frac > 0.0 && opts.alpha_bar_frac < 1.0) {
        return Err(Error::domain(
            "alpha_bar_frac",
            opts.alpha_bar_frac,
            "(0, 1)",
        ));
    }
    if !(opts.r_frac > 1.0) {
        return Err(Error::domain("R_frac", opts.r_frac, "(1, inf)"));
    }
    let c2 = t2.c();
    let envelope = largest_envelope(h, opts.margin)?;
    if envelope.alpha < MIN_ALPHA {
        return Err(Error::Envelope {
            alpha: envelope.alpha,
        });
    }
    let ks = k_star(envelope.a0, envelope.b0, c2);
    if k >= ks.value {
        return Err(Error::OutOfRegime {
            k,
            k_star: ks.value,
        });
    }
    let gamma = gamma_k(c2, k);
    let k_const = k_constant(h, c2, k)?;
    let alpha = envelope.alpha;
    let alpha_bar = opts.alpha_bar_frac * alpha;
    let r_min = 2.0 * k_const / (1.0 - gamma);
    let r = opts.r_frac * r_min;

    let nu_tilde_raw = nu_tilde(&envelope, h.n_bins(), k, c2);
    let nu_total: f64 = nu_tilde_raw.iter().sum();
    let nu_tilde = if nu_total > 0.0 {
        Some(DensityOnI::from_masses(nu_tilde_raw.clone())?)
    } else {
        None
    };

    let mut best = MinimizedRate {
        value: f64::INFINITY,
        alpha_bar_frac: f64::NAN,
        r_frac: f64::NAN,
    };
    for i in 1..100 {
        let af = i as f64 / 100.0;
        for j in 0..=60 {
            // R_frac from 1.01 to 1e6, geometric
            let rf = 1.01 * (1e6f64 / 1.01).powf(j as f64 / 60.0);
            let v = rate_bound(alpha, af * alpha, gamma, k_const, rf * r_min);
            if v < best.value {
                best = MinimizedRate {
                    value: v,
                    alpha_bar_frac: af,
                    r_frac: rf,
                };
            }
        }
    }

    Ok(MinorizationCertificate {
        k,
        psi0: envelope.masses(h.n_bins()),
        envelope,
        alpha_k: alpha,
        nu_tilde_raw,
        nu_tilde_mass: nu_total,
        nu_tilde,
        k_star: ks,
        gamma_k: gamma,
        k_const,
        r,
        alpha_bar,
        rate_bound: rate_bound(alpha, alpha_bar, gamma, k_const, r),
        min_rate_bound: best,
    })
}

/// `ν̃` of every z-bin: the smallest envelope mass landing in the bin over a
/// grid of drive values `w ∈ [−c₂, c₂]`, divided by `α_k`.
fn nu_tilde(env: &Envelope, n_bins: usize, k: f64, c2: f64) -> Vec<f64> {
    let ws: Vec<f64> = (0..NU_TILDE_W_POINTS)
        .map(|i| -c2 + 2.0 * c2 * i as f64 / (NU_TILDE_W_POINTS - 1) as f64)
        .collect();
    (0..n_bins)
        .map(|j| {
            let (z0, z1) = bin_edges(n_bins, j);
            let min_len = ws
                .iter()
                .map(|&w| {
                    let lo = ((z0 - (1.0 - k) * w) / k).max(env.a0);
                    let hi = ((z1 - (1.0 - k) * w) / k).min(env.b0);
                    (hi - lo).max(0.0)
                })
                .fold(f64::INFINITY, f64::min);
            env.height * min_len / env.alpha
        })
        .collect()
}
