//! One function per subcommand. Each writes its manifest before computing.

use rand::Rng;
use skewlab_core::density::{bin_center, DensityOnI};
use skewlab_core::dimension::{delta_dq, dq_estimate, geometric_grid, DimensionSpectrum};
use skewlab_core::dynamics::{
    empirical_measures, empirical_measures_after, lyapunov_trace, simulate_coupled, sync_error,
};
use skewlab_core::maps::invariant_density;
use skewlab_core::measures::{
    char_function_gap, default_t_grid, mean_abs_diff, product_measure, tv_distance,
};
use skewlab_core::operator::{
    build_ulam, convergence_trace, drift_certificate, drift_mc_check, finite_v_moment,
    fit_geometric_rate, minorization_certificate, stationary_density, MinorizationOptions,
};
use skewlab_core::rng::seeded;
use skewlab_core::{Error as CoreError, QuadraticMap};

use crate::config::{Config, Manifest};
use crate::error::CliError;
use crate::output::{kv, OutDir, G};

pub const COMMANDS: [&str; 7] = [
    "simulate",
    "stationary",
    "certify",
    "weaklimit",
    "question3",
    "dimension",
    "ulam-dump",
];

pub fn run(cfg: &Config, command: &str) -> Result<(), CliError> {
    let manifest = Manifest::new(cfg, command);
    let out = OutDir::create(&cfg.common.out, &manifest.hash())?;
    out.raw("manifest.toml", manifest.to_toml().as_bytes())?;
    match command {
        "simulate" => simulate(cfg, &out),
        "stationary" => stationary(cfg, &out),
        "certify" => certify(cfg, &out),
        "weaklimit" => weaklimit(cfg, &out),
        "question3" => question3(cfg, &out),
        "dimension" => dimension(cfg, &out),
        "ulam-dump" => ulam_dump(cfg, &out),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}

fn maps(cfg: &Config) -> Result<(QuadraticMap, QuadraticMap), CliError> {
    Ok((
        QuadraticMap::new(cfg.common.c1)?,
        QuadraticMap::new(cfg.common.c2)?,
    ))
}

/// The master's invariant density on `n_bins` bins, used as the chain noise.
pub fn noise_density(cfg: &Config, n_bins: usize) -> Result<DensityOnI, CliError> {
    let t1 = QuadraticMap::new(cfg.common.c1)?;
    Ok(invariant_density(
        &t1,
        cfg.h_provider(),
        n_bins,
        cfg.common.h_budget,
        cfg.common.seed,
    )?)
}

fn write_density(out: &OutDir, name: &str, d: &DensityOnI) -> Result<(), CliError> {
    let mut csv = out.csv(name, &["bin_center", "density"])?;
    let n = d.n_bins();
    for j in 0..n {
        csv.row(&[&G(bin_center(n, j)), &G(d.density_value(j))])?;
    }
    csv.finish()
}

fn simulate(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let (t1, t2) = maps(cfg)?;
    let o = simulate_coupled(&t1, &t2, s.k, s.x0, s.y0, s.n)?;

    let mut csv = out.csv("orbit.csv", &["i", "x", "y", "sync_error"])?;
    for i in (0..o.len()).step_by(s.orbit_stride) {
        let (x, y) = (o.xs[i], o.ys[i]);
        csv.row(&[&i, &G(x), &G(y), &G((x - y).abs())])?;
    }
    csv.finish()?;

    let checkpoints: Vec<usize> = (1..=s.lyapunov_checkpoints)
        .map(|j| (j * s.n / s.lyapunov_checkpoints).max(1))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let trace = lyapunov_trace(&o, s.clip, &checkpoints)?;
    let mut csv = out.csv("lyapunov.csv", &["n", "lambda_tilde", "clipped_count"])?;
    for e in &trace {
        csv.row(&[&e.n, &G(e.value), &e.clipped])?;
    }
    csv.finish()?;

    let last = trace.last().expect("at least one checkpoint");
    out.report(
        "summary.txt",
        &[
            kv("k", s.k),
            kv("n", s.n),
            kv("sync_error_tail", s.sync_tail),
            kv("sync_error", G(sync_error(&o, s.sync_tail)?)),
            kv("lambda_tilde", G(last.value)),
            kv("clipped_count", last.clipped),
            kv(
                "first_inconsistency",
                o.first_inconsistency()
                    .map_or("none".to_string(), |i| i.to_string()),
            ),
        ],
    )
}

fn initial_density(name: &str, n_bins: usize, seed: u64) -> DensityOnI {
    match name {
        "uniform" => DensityOnI::uniform(n_bins),
        "point-mass" => DensityOnI::point_mass(n_bins, 3 * n_bins / 4),
        "random" => {
            let mut rng = seeded(seed, 2);
            DensityOnI::from_masses((0..n_bins).map(|_| rng.random::<f64>().powi(3)).collect())
                .expect("random masses are positive")
        }
        other => unreachable!("f0 {other} checked at load"),
    }
}

fn stationary(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let st = &cfg.stationary;
    let (_, t2) = maps(cfg)?;
    let h = noise_density(cfg, st.n_bins)?;
    write_density(out, "h.csv", &h)?;
    let op = build_ulam(&t2, &h, st.k, st.n_bins, st.samples_per_bin)?;

    let mut fixed = Vec::new();
    for name in &st.f0 {
        let f0 = initial_density(name, st.n_bins, cfg.common.seed);
        fixed.push((
            name,
            f0.clone(),
            stationary_density(&op, &f0, st.max_iter, st.tol)?,
        ));
    }
    let g = &fixed[0].2.density;
    write_density(out, "density.csv", g)?;

    let mut report = vec![
        kv("k", st.k),
        kv("n_bins", st.n_bins),
        kv("h_hash", h.content_hash()),
        kv("g_hash", g.content_hash()),
    ];
    let mut csv = out.csv("trace.csv", &["n", "f0", "l1_distance"])?;
    for (name, f0, fp) in &fixed {
        report.push(kv(&format!("{name}.iterations"), fp.iterations));
        report.push(kv(&format!("{name}.residual"), G(fp.residual)));
        report.push(kv(
            &format!("{name}.l1_to_first"),
            G(skewlab_core::measures::l1_distance(&fp.density, g)?),
        ));
        let trace = convergence_trace(&op, f0, g, st.trace_steps)?;
        for (n, d) in trace.iter().enumerate() {
            csv.row(&[&n, name, &G(*d)])?;
        }
        match fit_geometric_rate(trace) {
            Ok(fit) => {
                report.push(kv(&format!("{name}.rate"), G(fit.rate)));
                report.push(kv(&format!("{name}.rate_r_squared"), G(fit.r_squared)));
                report.push(kv(
                    &format!("{name}.rate_window"),
                    format!("{}..{}", fit.window.0, fit.window.1),
                ));
            }
            Err(CoreError::FitWindow { failure, .. }) => {
                report.push(kv(&format!("{name}.rate"), format!("none ({failure})")));
            }
            Err(e) => return Err(e.into()),
        }
    }
    csv.finish()?;
    out.report("summary.txt", &report)
}

fn certify(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let ce = &cfg.certify;
    let (_, t2) = maps(cfg)?;
    let h = noise_density(cfg, ce.n_bins)?;
    let opts = MinorizationOptions {
        margin: ce.margin,
        alpha_bar_frac: ce.alpha_bar_frac,
        r_frac: ce.r_frac,
    };
    let minor = match minorization_certificate(&t2, &h, ce.k, &opts) {
        Ok(c) => c,
        Err(CoreError::OutOfRegime { k, k_star }) => {
            out.report(
                "certificate.txt",
                &[
                    kv("k", ce.k),
                    kv("c2", cfg.common.c2),
                    kv("k_star", k_star),
                    kv("VALID", false),
                    kv("minorization", "out of regime"),
                ],
            )?;
            return Err(CliError::OutOfRegime(format!(
                "k = {k} is not below k_star = {k_star}"
            )));
        }
        Err(e) => return Err(e.into()),
    };

    let m = ce.y_grid_points;
    let y_grid: Vec<f64> = (0..m)
        .map(|i| -ce.y_grid_max + 2.0 * ce.y_grid_max * i as f64 / (m - 1) as f64)
        .collect();
    let drift = drift_certificate(&t2, &h, ce.k, &y_grid)?;
    let mut csv = out.csv("residuals.csv", &["y", "residual", "tolerance"])?;
    for ((y, r), t) in drift
        .y_grid
        .iter()
        .zip(&drift.residuals)
        .zip(&drift.tolerances)
    {
        csv.row(&[&G(*y), &G(*r), &G(*t)])?;
    }
    csv.finish()?;

    let c = &minor;
    let mut csv = out.csv("nu_tilde.csv", &["bin_center", "nu_tilde_mass"])?;
    for (j, v) in c.nu_tilde_raw.iter().enumerate() {
        csv.row(&[&G(bin_center(ce.n_bins, j)), &G(*v)])?;
    }
    csv.finish()?;

    let mc = drift_mc_check(
        &t2,
        &h,
        ce.k,
        ce.mc_y0,
        ce.mc_steps,
        ce.mc_reps,
        cfg.common.seed,
    )?;
    let mut csv = out.csv("drift_mc.csv", &["n", "mean", "std_error", "bound", "pass"])?;
    for r in &mc.rows {
        csv.row(&[&r.n, &G(r.mean), &G(r.std_error), &G(r.bound), &r.pass()])?;
    }
    csv.finish()?;

    out.report(
        "certificate.txt",
        &[
            kv("k", ce.k),
            kv("c2", cfg.common.c2),
            kv("gamma_k", G(drift.gamma_k)),
            kv("K_k", G(drift.k_const)),
            kv("max_residual", G(drift.max_residual())),
            kv("VALID", drift.valid),
            kv(
                "h_finite_V_moment",
                finite_v_moment(&h, cfg.common.c2, ce.k)?
                    .map_or("none".into(), |v| G(v).to_string()),
            ),
            kv("a0", G(c.envelope.a0)),
            kv("b0", G(c.envelope.b0)),
            kv("psi0_height", G(c.envelope.height)),
            kv("alpha_k", G(c.alpha_k)),
            kv("nu_tilde_mass", G(c.nu_tilde_mass)),
            kv("k_star", c.k_star.value),
            kv("k_star_raw", G(c.k_star.raw)),
            kv("k_star_branch", format!("{:?}", c.k_star.branch)),
            kv("R", G(c.r)),
            kv("alpha_bar", G(c.alpha_bar)),
            kv("rate_bound", G(c.rate_bound)),
            kv("minimized_rate_bound", G(c.min_rate_bound.value)),
            kv("minimized_alpha_bar_frac", c.min_rate_bound.alpha_bar_frac),
            kv("minimized_R_frac", G(c.min_rate_bound.r_frac)),
            kv("drift_mc_pass", mc.pass),
        ],
    )
}

/// Weak-limit diagnostics of the joint empirical measure at one coupling.
#[derive(Debug, Clone, Copy)]
pub struct WeakLimitRow {
    pub k: f64,
    pub mean_abs_diff: f64,
    pub char_function_gap: f64,
    pub product_l1_gap: f64,
}

pub fn weaklimit_row(
    t1: &QuadraticMap,
    t2: &QuadraticMap,
    k: f64,
    w: &crate::config::WeakLimit,
) -> Result<WeakLimitRow, CliError> {
    let o = simulate_coupled(t1, t2, k, w.x0, w.y0, w.n)?;
    let m = empirical_measures_after(&o, w.n_bins, w.burn_in)?;
    let product = product_measure(&m.master, &m.slave)?;
    Ok(WeakLimitRow {
        k,
        mean_abs_diff: mean_abs_diff(&m.joint),
        char_function_gap: char_function_gap(&m.joint, &m.master, &default_t_grid())?,
        product_l1_gap: m.joint.l1_distance(&product)?,
    })
}

fn weaklimit(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let w = &cfg.weaklimit;
    let (t1, t2) = maps(cfg)?;
    let mut csv = out.csv(
        "weaklimit.csv",
        &["k", "mean_abs_diff", "char_function_gap", "product_l1_gap"],
    )?;
    for &k in &w.k_list {
        let r = weaklimit_row(&t1, &t2, k, w)?;
        csv.row(&[
            &r.k,
            &G(r.mean_abs_diff),
            &G(r.char_function_gap),
            &G(r.product_l1_gap),
        ])?;
    }
    csv.finish()
}

/// Distances between the deterministic slave and the chain at one coupling.
#[derive(Debug, Clone, Copy)]
pub struct Question3Row {
    pub k: f64,
    /// `TV(ν_n, g^(k))`.
    pub tv_marginal: f64,
    /// `TV(ρ_n, μ_n ⊗ g^(k))`, the μ_n-average of `TV(ρ_n(·|x), g^(k))`.
    pub tv_conditional: f64,
}

pub fn question3_row(
    t1: &QuadraticMap,
    t2: &QuadraticMap,
    h: &DensityOnI,
    k: f64,
    q: &crate::config::Question3,
) -> Result<Question3Row, CliError> {
    let op = build_ulam(t2, h, k, q.n_bins, q.samples_per_bin)?;
    let g = stationary_density(
        &op,
        &DensityOnI::uniform(q.n_bins),
        skewlab_core::operator::DEFAULT_MAX_ITER,
        skewlab_core::operator::DEFAULT_TOLERANCE,
    )?
    .density;
    let o = simulate_coupled(t1, t2, k, q.x0, q.y0, q.n)?;
    let m = empirical_measures(&o, q.n_bins)?;
    Ok(Question3Row {
        k,
        tv_marginal: tv_distance(&m.slave, &g)?,
        tv_conditional: m.joint.tv_distance(&product_measure(&m.master, &g)?)?,
    })
}

fn question3(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let q = &cfg.question3;
    let (t1, t2) = maps(cfg)?;
    let h = noise_density(cfg, q.n_bins)?;
    let mut rows = Vec::new();
    for &k in &q.k_list {
        rows.push(question3_row(&t1, &t2, &h, k, q)?);
    }
    let control = if q.control_row {
        Some(question3_row(&t1, &t2, &h, 1.0, q)?)
    } else {
        None
    };
    let mut csv = out.csv(
        "question3.csv",
        &["k", "tv_marginal", "tv_conditional", "role"],
    )?;
    for r in &rows {
        csv.row(&[&r.k, &G(r.tv_marginal), &G(r.tv_conditional), &"sweep"])?;
    }
    if let Some(r) = &control {
        csv.row(&[&r.k, &G(r.tv_marginal), &G(r.tv_conditional), &"control"])?;
    }
    csv.finish()?;

    let min_marginal = rows
        .iter()
        .map(|r| r.tv_marginal)
        .fold(f64::INFINITY, f64::min);
    let min_conditional = rows
        .iter()
        .map(|r| r.tv_conditional)
        .fold(f64::INFINITY, f64::min);
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].tv_marginal <= w[0].tv_marginal);
    out.report(
        "summary.txt",
        &[
            kv("min_tv_marginal", G(min_marginal)),
            kv("tv_floor", q.tv_floor),
            kv("above_floor", min_marginal >= q.tv_floor),
            kv("marginal_monotone_decreasing", decreasing),
            kv("min_tv_conditional", G(min_conditional)),
        ],
    )
}

fn spectrum_rows(
    csv: &mut crate::output::Csv,
    k: &dyn std::fmt::Display,
    role: &str,
    s: &DimensionSpectrum,
) -> Result<(), CliError> {
    for (i, q) in s.q_grid.iter().enumerate() {
        let d = s.value(i).map_or("NA".to_string(), |v| G(v).to_string());
        csv.row(&[k, &role, q, &d, &G(s.r_squared[i]), &s.accepted[i]])?;
    }
    Ok(())
}

fn dimension(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let d = &cfg.dimension;
    let (t1, t2) = maps(cfg)?;
    let r_grid = geometric_grid(d.r_min, d.r_max, d.r_points);
    let columns = ["k", "role", "q", "d_q", "fit_r2", "accepted"];
    let mut spectra = out.csv("spectra.csv", &columns)?;
    let mut delta = out.csv("delta.csv", &["k", "q", "delta_dq", "accepted"])?;
    for &k in &d.k_list {
        let o = simulate_coupled(&t1, &t2, k, d.x0, d.y0, d.n)?;
        let master = dq_estimate(&o.xs, &d.q_grid, &r_grid)?.with_min_r_squared(d.min_r_squared);
        let slave = dq_estimate(&o.ys, &d.q_grid, &r_grid)?.with_min_r_squared(d.min_r_squared);
        spectrum_rows(&mut spectra, &k, "master", &master)?;
        spectrum_rows(&mut spectra, &k, "slave", &slave)?;
        for (i, (q, dd)) in delta_dq(&master, &slave)?.into_iter().enumerate() {
            let ok = master.accepted[i] && slave.accepted[i];
            let shown = if ok {
                G(dd).to_string()
            } else {
                "NA".to_string()
            };
            delta.row(&[&k, &q, &shown, &ok])?;
        }
    }
    spectra.finish()?;
    delta.finish()?;

    if d.self_test {
        let mut rng = seeded(cfg.common.seed, 3);
        let pts: Vec<f64> = (0..d.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s = dq_estimate(&pts, &d.q_grid, &r_grid)?.with_min_r_squared(d.min_r_squared);
        let mut csv = out.csv("self_test.csv", &columns)?;
        spectrum_rows(&mut csv, &"NA", "uniform", &s)?;
        csv.finish()?;
    }
    Ok(())
}

fn ulam_dump(cfg: &Config, out: &OutDir) -> Result<(), CliError> {
    let u = &cfg.ulam_dump;
    let (_, t2) = maps(cfg)?;
    let h = noise_density(cfg, u.n_bins)?;
    let op = build_ulam(&t2, &h, u.k, u.n_bins, u.samples_per_bin)?;
    let path = out.path("ulam.csv");
    let file = std::fs::File::create(&path).map_err(|e| crate::output::io_error(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let extra = vec![
        format!("skewlab {}", env!("CARGO_PKG_VERSION")),
        format!("manifest sha256={}", out.hash()),
        "columns: row-major transition probabilities, one row per source bin".to_string(),
    ];
    op.write_csv(&mut w, &extra)
        .and_then(|_| std::io::Write::flush(&mut w))
        .map_err(|e| crate::output::io_error(&path, e))
}
