//! Checks against values computed independently of the library code paths.

use std::f64::consts::PI;

use rand::Rng;

use skewlab_core::density::{bin_edges, DensityOnI};
use skewlab_core::dimension::{default_q_grid, default_r_grid, dq_estimate, geometric_grid};
use skewlab_core::maps::{invariant_density, DensityProvider};
use skewlab_core::measures::l1_distance;
use skewlab_core::operator::{
    build_ulam, drift_certificate, gamma_k, lyapunov_v, stationary_density,
};
use skewlab_core::rng::seeded;
use skewlab_core::QuadraticMap;

fn cosh_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..30 {
        term *= x * x / ((2 * n - 1) * (2 * n)) as f64;
        sum += term;
    }
    sum
}

#[test]
fn gamma_matches_series_evaluation() {
    // c2 = 0.5, k = 0.5: c2^{1/k + 1} = 0.125
    let expected = 0.5 * cosh_series(0.125);
    assert!((expected - 0.5 * 1.007_822).abs() < 1e-6);
    assert!((gamma_k(0.5, 0.5) - expected).abs() < 1e-15);
    // c2 = 0.5, k = 0.9
    let expected = 0.1 * cosh_series(0.5f64.powf(1.0 / 0.9 + 1.0));
    assert!((gamma_k(0.5, 0.9) - expected).abs() < 1e-15);
    assert!((lyapunov_v(0.5, 0.5, 0.5).unwrap() - cosh_series(0.125)).abs() < 1e-15);
}

#[test]
fn full_map_orbit_follows_the_doubling_conjugacy() {
    // T(cos θ) = 1 − 2cos²θ = −cos 2θ, and T(−cos φ) = −cos 2φ
    let t = QuadraticMap::new(1.0).unwrap();
    let theta = 0.123_456_789_f64;
    let orbit = t.orbit(theta.cos(), 31).unwrap();
    for (n, x) in orbit.iter().enumerate().skip(1) {
        let expected = -(2f64.powi(n as i32) * theta).cos();
        assert!((x - expected).abs() < 1e-6, "n={n}: {x} vs {expected}");
    }
}

#[test]
fn arcsine_bins_match_closed_form() {
    let t = QuadraticMap::new(1.0).unwrap();
    let n = 64;
    let h = invariant_density(&t, DensityProvider::Analytic, n, 0, 0).unwrap();
    for j in 0..n {
        let (a, b) = bin_edges(n, j);
        // F(x) = 1/2 + asin(x)/π
        let mass = (b.asin() - a.asin()) / PI;
        assert!((h.weights()[j] - mass).abs() < 1e-15);
    }
}

#[test]
fn ulam_invariant_density_approaches_arcsine() {
    // the square-root singularities at the endpoints slow the Ulam scheme
    // down to roughly n^{-1/2} in L1
    let t = QuadraticMap::new(1.0).unwrap();
    let gap = |n| {
        let exact = invariant_density(&t, DensityProvider::Analytic, n, 0, 0).unwrap();
        let ulam = invariant_density(&t, DensityProvider::Ulam, n, 100_000, 0).unwrap();
        l1_distance(&exact, &ulam).unwrap()
    };
    let (coarse, fine) = (gap(64), gap(1024));
    assert!(fine < coarse / 2.0);
    assert!(fine < 0.05, "{fine}");
}

/// Exact `log ∫ h(x) [μ(B_r(x))]^{q−1} dx` for the arcsine law, using
/// `x = −cos(πt)` with `t` uniform on `[0, 1]`.
fn arcsine_log_correlation(q: f64, r: f64) -> f64 {
    let cdf = |x: f64| 0.5 + x.clamp(-1.0, 1.0).asin() / PI;
    let m = 400_000;
    let s: f64 = (0..m)
        .map(|i| {
            let x = -(PI * (i as f64 + 0.5) / m as f64).cos();
            (cdf(x + r) - cdf(x - r)).powf(q - 1.0)
        })
        .sum::<f64>()
        / m as f64;
    s.ln()
}

#[test]
fn arcsine_negative_q_dimension() {
    let q = -2.0;
    let radii = default_r_grid();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r.ln(), arcsine_log_correlation(q, r)))
        .collect();
    let oracle = skewlab_core::operator::least_squares(&pts).0 / (q - 1.0);
    assert!((oracle - 1.0).abs() < 0.1, "oracle D_-2 = {oracle}");

    let mut rng = seeded(11, 0);
    let samples: Vec<f64> = (0..1_000_000)
        .map(|_| -(PI * rng.random::<f64>()).cos())
        .collect();
    let est = dq_estimate(&samples, &[q], &radii).unwrap();
    assert!(
        (est.d_values[0] - 1.0).abs() < 0.1,
        "estimate {}",
        est.d_values[0]
    );
    assert!((est.d_values[0] - oracle).abs() < 0.05);
}

#[test]
fn dimension_invariants_on_uniform_samples() {
    let mut rng = seeded(2, 0);
    let pts: Vec<f64> = (0..200_000).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let q = default_q_grid();
    let s = dq_estimate(&pts, &q, &default_r_grid()).unwrap();
    let d0 = s.d_values[q.iter().position(|&v| v == 0.0).unwrap()];
    assert!((0.9..=1.05).contains(&d0));
    for w in s.d_values.windows(2) {
        assert!(w[1] <= w[0] + 0.1);
    }
    let fine = dq_estimate(&pts, &q, &geometric_grid(1e-3, 1e-1, 48)).unwrap();
    for (a, b) in s.d_values.iter().zip(&fine.d_values) {
        assert!((a - b).abs() <= 0.02);
    }
}

fn random_density(n: usize, seed: u64) -> DensityOnI {
    let mut rng = seeded(seed, 1);
    DensityOnI::from_masses((0..n).map(|_| rng.random::<f64>().powi(3)).collect()).unwrap()
}

#[test]
fn stationary_density_is_unique_from_random_starts() {
    let t1 = QuadraticMap::new(0.9).unwrap();
    let h = invariant_density(&t1, DensityProvider::Ulam, 256, 100_000, 0).unwrap();
    let t2 = QuadraticMap::new(0.5).unwrap();
    let op = build_ulam(&t2, &h, 0.5, 256, 8).unwrap();
    let reference = stationary_density(&op, &DensityOnI::uniform(256), 100_000, 1e-12)
        .unwrap()
        .density;
    for seed in 0..5 {
        let g = stationary_density(&op, &random_density(256, seed), 100_000, 1e-12)
            .unwrap()
            .density;
        assert!(l1_distance(&g, &reference).unwrap() <= 1e-8);
    }
}

#[test]
fn full_coupling_returns_noise_density() {
    let h = random_density(64, 9);
    let t2 = QuadraticMap::new(0.7).unwrap();
    let op = build_ulam(&t2, &h, 1.0, 64, 4).unwrap();
    for i in 0..64 {
        for (a, b) in op.matrix.row(i).iter().zip(h.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let fp = stationary_density(&op, &DensityOnI::point_mass(64, 3), 10, 1e-10).unwrap();
    assert_eq!(fp.iterations, 1);
    assert!(l1_distance(&fp.density, &h).unwrap() < 1e-12);
}

#[test]
fn drift_holds_for_chaotic_master() {
    let t1 = QuadraticMap::new(0.9).unwrap();
    let h = invariant_density(&t1, DensityProvider::Ulam, 512, 100_000, 0).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| -0.99 + 1.98 * i as f64 / 199.0).collect();
    for c2 in [0.3, 0.9] {
        let t2 = QuadraticMap::new(c2).unwrap();
        let cert = drift_certificate(&t2, &h, 0.5, &grid).unwrap();
        assert!(cert.valid, "max residual {}", cert.max_residual());
    }
}
