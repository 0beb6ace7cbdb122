//! Acceptance suite. Runs every criterion at the tolerances of the shipped
//! config and prints one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use skewlab_cli::commands::{noise_density, question3_row, weaklimit_row};
use skewlab_cli::Config;
use skewlab_core::density::DensityOnI;
use skewlab_core::dimension::{default_q_grid, delta_dq, dq_estimate, geometric_grid};
use skewlab_core::dynamics::{simulate_chain, simulate_coupled, transverse_lyapunov};
use skewlab_core::measures::l1_distance;
use skewlab_core::operator::{
    build_ulam, convergence_trace, drift_certificate, drift_mc_check, fit_geometric_rate, gamma_k,
    k_star, minorization_certificate, stationary_density, weighted_tv, KStarBranch,
    MinorizationOptions, DRIFT_TOLERANCE,
};
use skewlab_core::rng::seeded;
use skewlab_core::QuadraticMap;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const GRID_C2: [f64; 3] = [0.3, 0.5, 0.9];
const GRID_K: [f64; 3] = [0.2, 0.5, 0.8];
const N_BINS: usize = 1024;
const SAMPLES_PER_BIN: usize = 8;

fn grid() -> impl Iterator<Item = (f64, f64)> {
    GRID_C2
        .into_iter()
        .flat_map(|c2| GRID_K.into_iter().map(move |k| (c2, k)))
}

fn random_density(n: usize, seed: u64, stream: u64) -> DensityOnI {
    let mut rng = seeded(seed, stream);
    DensityOnI::from_masses((0..n).map(|_| rng.random::<f64>().powi(3)).collect())
        .expect("positive masses")
}

/// Same as `random_density` but zero on the two boundary bins.
fn interior_density(n: usize, seed: u64, stream: u64) -> DensityOnI {
    let mut w = random_density(n, seed, stream).into_weights();
    w[0] = 0.0;
    w[n - 1] = 0.0;
    DensityOnI::from_masses(w).expect("interior mass")
}

fn collapse(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let t2 = QuadraticMap::new(cfg.common.c2)?;
    let h = noise_density(cfg, N_BINS)?;
    let op = build_ulam(&t2, &h, 1.0, N_BINS, SAMPLES_PER_BIN)?;
    let mut row_gap: f64 = 0.0;
    for i in 0..N_BINS {
        let row = op.matrix.row(i);
        row_gap = row_gap.max(
            row.iter()
                .zip(h.weights())
                .map(|(p, q)| (p - q).abs())
                .sum(),
        );
    }
    let fp = stationary_density(&op, &DensityOnI::point_mass(N_BINS, 17), 10, 1e-12)?;
    let gap = l1_distance(&fp.density, &h)?;
    let pass = row_gap <= a.collapse_l1 && fp.iterations == 1 && gap <= a.collapse_l1;
    Ok((
        pass,
        format!(
            "max row L1 to h {row_gap:.2e}, iterations {}, L1(g, h) {gap:.2e} (tol {:.0e})",
            fp.iterations, a.collapse_l1
        ),
    ))
}

fn uniqueness(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let h = noise_density(cfg, N_BINS)?;
    let mut pass = true;
    let mut worst_l1: f64 = 0.0;
    let mut worst_r2: f64 = 1.0;
    let mut notes = Vec::new();
    for (c2, k) in grid() {
        let t2 = QuadraticMap::new(c2)?;
        let op = build_ulam(&t2, &h, k, N_BINS, SAMPLES_PER_BIN)?;
        let max_iter = cfg.stationary.max_iter;
        let tol = a.uniqueness_power_tol;
        let reference =
            stationary_density(&op, &DensityOnI::uniform(N_BINS), max_iter, tol)?.density;
        for start in 0..5 {
            let f0 = random_density(N_BINS, cfg.common.seed, 100 + start);
            let g = stationary_density(&op, &f0, max_iter, tol)?.density;
            worst_l1 = worst_l1.max(l1_distance(&g, &reference)?);
            let trace = convergence_trace(&op, &f0, &reference, cfg.stationary.trace_steps)?;
            match fit_geometric_rate(trace) {
                Ok(fit) => worst_r2 = worst_r2.min(fit.r_squared),
                Err(e) => {
                    pass = false;
                    notes.push(format!("c2={c2} k={k} start {start}: {e}"));
                }
            }
        }
    }
    pass &= worst_l1 <= a.uniqueness_l1 && worst_r2 >= a.trace_min_r_squared;
    let mut detail = format!(
        "max L1 between starts {worst_l1:.2e} (tol {:.0e}), min trace R² {worst_r2:.5} (min {})",
        a.uniqueness_l1, a.trace_min_r_squared
    );
    for n in notes {
        detail.push_str("; ");
        detail.push_str(&n);
    }
    Ok((pass, detail))
}

fn drift(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let h = noise_density(cfg, N_BINS)?;
    let ce = &cfg.certify;
    let m = ce.y_grid_points;
    let y_grid: Vec<f64> = (0..m)
        .map(|i| -ce.y_grid_max + 2.0 * ce.y_grid_max * i as f64 / (m - 1) as f64)
        .collect();
    let scale = a.drift_rel_tol / DRIFT_TOLERANCE;
    let mut pass = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (c2, k) in grid() {
        let t2 = QuadraticMap::new(c2)?;
        let cert = drift_certificate(&t2, &h, k, &y_grid)?;
        for (r, t) in cert.residuals.iter().zip(&cert.tolerances) {
            worst = worst.max(r / t * DRIFT_TOLERANCE);
            pass &= *r <= t * scale;
        }
    }
    let high = gamma_k(0.5, 0.999);
    let low = gamma_k(0.5, 0.001);
    pass &= high < a.gamma_high_k && low > a.gamma_low_k;
    Ok((
        pass,
        format!(
            "{} points × 9 configs, max residual / (γV + K) {worst:.2e} (tol {:.0e}); \
             γ(k=0.999) = {high:.3e} (< {}), γ(k=0.001) = {low:.6} (> {})",
            m, a.drift_rel_tol, a.gamma_high_k, a.gamma_low_k
        ),
    ))
}

fn iterated_drift(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let ce = &cfg.certify;
    let h = noise_density(cfg, N_BINS)?;
    let t2 = QuadraticMap::new(0.5)?;
    let mc = drift_mc_check(
        &t2,
        &h,
        0.5,
        ce.mc_y0,
        ce.mc_steps,
        ce.mc_reps,
        cfg.common.seed,
    )?;
    let mut pass = mc.rows.len() == ce.mc_steps + 1;
    let mut min_margin = f64::INFINITY;
    for r in &mc.rows {
        let margin = r.bound + a.mc_se_multiple * r.std_error - r.mean;
        min_margin = min_margin.min(margin);
        pass &= margin >= 0.0;
    }
    Ok((
        pass,
        format!(
            "{} replicas, n ≤ {}, min (bound + {}·SE − mean) = {min_margin:.3e}",
            ce.mc_reps, ce.mc_steps, a.mc_se_multiple
        ),
    ))
}

fn rate_dominance(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let ce = &cfg.certify;
    let h = noise_density(cfg, N_BINS)?;
    let opts = MinorizationOptions {
        margin: ce.margin,
        alpha_bar_frac: ce.alpha_bar_frac,
        r_frac: ce.r_frac,
    };
    let mut pass = true;
    let mut tightest = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0);
    let mut tested = 0;
    for (c2, k) in grid() {
        let t2 = QuadraticMap::new(c2)?;
        let cert = minorization_certificate(&t2, &h, k, &opts)?;
        if k >= cert.k_star.value {
            continue;
        }
        tested += 1;
        let op = build_ulam(&t2, &h, k, N_BINS, SAMPLES_PER_BIN)?;
        let g = stationary_density(
            &op,
            &DensityOnI::uniform(N_BINS),
            cfg.stationary.max_iter,
            1e-13,
        )?
        .density;
        let f0 = DensityOnI::point_mass(N_BINS, 3 * N_BINS / 4);
        let fit = fit_geometric_rate(convergence_trace(&op, &f0, &g, cfg.stationary.trace_steps)?)?;
        let bound = cert.rate_bound;
        pass &= fit.rate > 0.0 && fit.rate < 1.0 && bound > 0.0 && bound < 1.0 && fit.rate <= bound;
        if bound - fit.rate < tightest.0 {
            tightest = (bound - fit.rate, c2, k, fit.rate, bound);
        }
    }
    pass &= tested > 0;

    let mut sandwich_worst: f64 = 0.0;
    let mut rng = seeded(cfg.common.seed, 50);
    for pair in 0..100 {
        let f = interior_density(64, cfg.common.seed, 200 + 2 * pair);
        let g = interior_density(64, cfg.common.seed, 201 + 2 * pair);
        let c2 = rng.random_range(0.1..0.95);
        let k = rng.random_range(0.05..0.95);
        let beta = 10f64.powf(rng.random_range(-3.0..3.0));
        let d1 = weighted_tv(&f, &g, c2, k, 1.0)?;
        let db = weighted_tv(&f, &g, c2, k, beta)?;
        let slack = a.sandwich_tol * d1.max(1.0);
        let lower = beta.min(1.0) * d1 - db;
        let upper = db - beta.max(1.0) * d1;
        sandwich_worst = sandwich_worst.max(lower).max(upper);
        pass &= lower <= slack && upper <= slack;
    }
    let (gap, c2, k, rate, bound) = tightest;
    Ok((
        pass,
        format!(
            "{tested} configs with k < k_*, tightest c2={c2} k={k}: rate {rate:.4} ≤ bound {bound:.4} \
             (gap {gap:.4}); sandwich worst violation {sandwich_worst:.1e} over 100 pairs (tol {:.0e})",
            a.sandwich_tol
        ),
    ))
}

fn k_star_table(_: &Config) -> Outcome {
    // each case: envelope, c2, branch, hand-evaluated raw value and the
    // value after `∨ 1` and the clamp to (0, 1]
    let cases = [
        (0.6, 0.9, 0.3, KStarBranch::AboveC2, 0.7 / 0.3, 1.0),
        (-0.9, -0.7, 0.2, KStarBranch::BelowMinusC2, 0.8 / 0.5, 1.0),
        (-0.5, 0.5, 0.9, KStarBranch::Straddles, 1.0, 1.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (a0, b0, c2, branch, raw, expected) in cases {
        let ks = k_star(a0, b0, c2);
        pass &= ks.branch == branch && (ks.raw - raw).abs() < 1e-12 && ks.value == expected;
        parts.push(format!(
            "{:?} raw {:.4} value {}",
            ks.branch, ks.raw, ks.value
        ));
    }
    Ok((pass, parts.join(", ")))
}

fn weak_limits(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let mut w = cfg.weaklimit.clone();
    w.n = 10_000_000;
    w.n_bins = 64;
    let t = QuadraticMap::new(0.9)?;
    let sync = weaklimit_row(&t, &t, 0.99, &w)?;
    let t2 = QuadraticMap::new(a.product_c2)?;
    let free = weaklimit_row(&t, &t2, 0.01, &w)?;
    let pass = sync.mean_abs_diff <= a.mad_max
        && sync.char_function_gap <= a.cf_gap_max
        && free.product_l1_gap <= a.product_l1_max;
    Ok((
        pass,
        format!(
            "k=0.99: mean_abs_diff {:.2e} (≤ {}), char_function_gap {:.2e} (≤ {}); \
             k=0.01, c2={}: product L1 {:.4} (≤ {})",
            sync.mean_abs_diff,
            a.mad_max,
            sync.char_function_gap,
            a.cf_gap_max,
            a.product_c2,
            free.product_l1_gap,
            a.product_l1_max
        ),
    ))
}

fn question_three(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let q = &cfg.question3;
    let t1 = QuadraticMap::new(cfg.common.c1)?;
    let t2 = QuadraticMap::new(cfg.common.c2)?;
    let h = noise_density(cfg, q.n_bins)?;
    let mut rows = Vec::new();
    for &k in &q.k_list {
        rows.push(question3_row(&t1, &t2, &h, k, q)?);
    }
    let marginal: Vec<f64> = rows.iter().map(|r| r.tv_marginal).collect();
    let min_marginal = marginal.iter().copied().fold(f64::INFINITY, f64::min);
    let min_conditional = rows
        .iter()
        .map(|r| r.tv_conditional)
        .fold(f64::INFINITY, f64::min);
    let decays_below =
        marginal.windows(2).all(|w| w[1] <= w[0]) && marginal.last().is_some_and(|&v| v < 0.01);
    let pass =
        min_marginal >= q.tv_floor && !decays_below && min_conditional >= a.conditional_tv_floor;
    let shown: Vec<String> = marginal.iter().map(|v| format!("{v:.4}")).collect();
    Ok((
        pass,
        format!(
            "marginal TV [{}], min {min_marginal:.4} (floor {}); conditional TV min \
             {min_conditional:.4} (floor {})",
            shown.join(", "),
            q.tv_floor,
            a.conditional_tv_floor
        ),
    ))
}

fn dimension(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let d = &cfg.dimension;
    let n = 1_000_000;
    let q = default_q_grid();
    let r = geometric_grid(d.r_min, d.r_max, d.r_points);

    let mut rng = seeded(cfg.common.seed, 60);
    let uniform: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let su = dq_estimate(&uniform, &q, &r)?;
    let uniform_err = su
        .d_values
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);

    let atom = vec![0.25; n];
    let sa = dq_estimate(&atom, &q, &r)?;
    let atom_err = sa.d_values.iter().map(|v| v.abs()).fold(0.0, f64::max);

    let t1 = QuadraticMap::new(cfg.common.c1)?;
    let t2 = QuadraticMap::new(cfg.common.c2)?;
    let o = simulate_coupled(&t1, &t2, 1.0, d.x0, d.y0, n)?;
    let master = dq_estimate(&o.xs, &q, &r)?;
    let slave = dq_estimate(&o.ys, &q, &r)?;
    let delta = delta_dq(&master, &slave)?
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max);

    let pass = uniform_err <= a.dq_tol && atom_err <= a.dq_tol && delta <= a.dq_tol;
    Ok((
        pass,
        format!(
            "uniform max |D_q − 1| {uniform_err:.4}, atom max |D_q| {atom_err:.4}, \
             k=1 max ΔD_q {delta:.2e} (tol {})",
            a.dq_tol
        ),
    ))
}

fn lyapunov_oracle(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let s = &cfg.simulate;
    let t1 = QuadraticMap::new(cfg.common.c1)?;
    let full = QuadraticMap::new(1.0)?;
    let o = simulate_coupled(&t1, &full, 0.0, s.x0, s.y0, 10_000_000)?;
    let est = transverse_lyapunov(&o, s.clip)?;
    let lyap_err = (est.value - std::f64::consts::LN_2).abs();

    // T(cos θ) = −cos 2θ, so x_n = −cos(2^n θ) for n ≥ 1
    let mut conj_err: f64 = 0.0;
    for theta in [0.123_456_789, 0.5, 1.0, 2.0, 2.9] {
        let orbit = full.orbit(f64::cos(theta), 30)?;
        for (n, x) in orbit.iter().enumerate().skip(1) {
            conj_err = conj_err.max((x + (2f64.powi(n as i32) * theta).cos()).abs());
        }
    }
    let pass = lyap_err <= a.lyapunov_tol && conj_err <= a.conjugacy_tol;
    Ok((
        pass,
        format!(
            "λ̃ = {:.6} at n = 1e7 ({} clipped), |λ̃ − ln 2| {lyap_err:.2e} (tol {}); \
             conjugacy max error {conj_err:.2e} for n ≤ 30 (tol {:.0e})",
            est.value, est.clipped, a.lyapunov_tol, a.conjugacy_tol
        ),
    ))
}

fn consistency(cfg: &Config) -> Outcome {
    let a = &cfg.acceptance;
    let n_bins = a.chain_n_bins;
    let h = noise_density(cfg, n_bins)?;
    let mut worst: f64 = 0.0;
    for (i, (c2, k)) in grid().enumerate() {
        let t2 = QuadraticMap::new(c2)?;
        let op = build_ulam(&t2, &h, k, n_bins, SAMPLES_PER_BIN)?;
        let g = stationary_density(
            &op,
            &DensityOnI::uniform(n_bins),
            cfg.stationary.max_iter,
            1e-12,
        )?
        .density;
        let path = simulate_chain(
            &t2,
            &h,
            k,
            cfg.simulate.y0,
            a.chain_n,
            cfg.common.seed + i as u64,
        )?;
        let hist = DensityOnI::histogram(n_bins, &path.ys)?;
        worst = worst.max(l1_distance(&hist, &g)?);
    }
    Ok((
        worst <= a.chain_l1_max,
        format!(
            "max L1(chain histogram, Ulam g) {worst:.4} over 9 configs at {n_bins} bins (tol {})",
            a.chain_l1_max
        ),
    ))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn(&Config) -> Outcome,
}

fn main() -> ExitCode {
    let cfg = Config::shipped_default();
    let minutes = |m: u64| Some(Duration::from_secs(60 * m));
    let criteria = [
        Criterion {
            id: 1,
            name: "k=1 collapse",
            budget: Some(Duration::from_secs(10)),
            run: collapse,
        },
        Criterion {
            id: 2,
            name: "uniqueness",
            budget: minutes(5),
            run: uniqueness,
        },
        Criterion {
            id: 3,
            name: "drift certificate",
            budget: None,
            run: drift,
        },
        Criterion {
            id: 4,
            name: "iterated drift bound",
            budget: minutes(2),
            run: iterated_drift,
        },
        Criterion {
            id: 5,
            name: "rate dominance and sandwich",
            budget: None,
            run: rate_dominance,
        },
        Criterion {
            id: 6,
            name: "k_* case table",
            budget: None,
            run: k_star_table,
        },
        // three coupled runs, each well inside the per-k budget
        Criterion {
            id: 7,
            name: "weak limits",
            budget: minutes(10),
            run: weak_limits,
        },
        Criterion {
            id: 8,
            name: "deterministic slave vs chain",
            budget: None,
            run: question_three,
        },
        Criterion {
            id: 9,
            name: "dimension estimator",
            budget: minutes(5),
            run: dimension,
        },
        Criterion {
            id: 10,
            name: "Lyapunov and conjugacy oracles",
            budget: None,
            run: lyapunov_oracle,
        },
        Criterion {
            id: 11,
            name: "chain vs Ulam consistency",
            budget: None,
            run: consistency,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)(&cfg);
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed < b);
        let (pass, detail) = match result {
            Ok((pass, detail)) => (pass && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = match c.budget {
            Some(b) => format!("{:.1} s / {} s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        println!(
            "{} {:>2} {}: {} [{}]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            timing
        );
        if !pass {
            failures += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
