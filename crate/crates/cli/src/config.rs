//! Experiment configuration: a TOML file with one section per subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewlab_core::maps::DensityProvider;

use crate::error::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub common: Common,
    pub simulate: Simulate,
    pub stationary: Stationary,
    pub certify: Certify,
    pub weaklimit: WeakLimit,
    pub question3: Question3,
    pub dimension: Dimension,
    pub ulam_dump: UlamDump,
    pub acceptance: Acceptance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    /// How the noise density `h` (the master's invariant density) is built.
    pub h_provider: String,
    /// Orbit length or iteration budget for `h_provider`.
    pub h_budget: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub k: f64,
    pub x0: f64,
    pub y0: f64,
    pub n: usize,
    /// Write every `orbit_stride`-th point to the orbit file.
    pub orbit_stride: usize,
    pub lyapunov_checkpoints: usize,
    pub clip: f64,
    pub sync_tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stationary {
    pub k: f64,
    pub n_bins: usize,
    pub samples_per_bin: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Initial densities: "uniform", "point-mass" or "random".
    pub f0: Vec<String>,
    pub trace_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certify {
    pub k: f64,
    pub n_bins: usize,
    pub y_grid_points: usize,
    pub y_grid_max: f64,
    pub margin: f64,
    pub alpha_bar_frac: f64,
    pub r_frac: f64,
    pub mc_y0: f64,
    pub mc_steps: usize,
    pub mc_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakLimit {
    pub k_list: Vec<f64>,
    pub n: usize,
    pub n_bins: usize,
    pub burn_in: usize,
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question3 {
    pub k_list: Vec<f64>,
    pub n: usize,
    pub n_bins: usize,
    pub samples_per_bin: usize,
    pub x0: f64,
    pub y0: f64,
    /// Lower bound expected for the smallest marginal TV over `k_list`.
    pub tv_floor: f64,
    /// Also write the k = 1 control row.
    pub control_row: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub k_list: Vec<f64>,
    pub n: usize,
    pub x0: f64,
    pub y0: f64,
    pub q_grid: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    pub min_r_squared: f64,
    /// Also estimate the spectrum of i.i.d. uniform samples.
    pub self_test: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlamDump {
    pub k: f64,
    pub n_bins: usize,
    pub samples_per_bin: usize,
}

/// Tolerances checked by the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acceptance {
    pub collapse_l1: f64,
    pub uniqueness_l1: f64,
    pub uniqueness_power_tol: f64,
    pub trace_min_r_squared: f64,
    pub drift_rel_tol: f64,
    pub gamma_high_k: f64,
    pub gamma_low_k: f64,
    pub mc_se_multiple: f64,
    pub sandwich_tol: f64,
    pub mad_max: f64,
    pub cf_gap_max: f64,
    pub product_l1_max: f64,
    pub product_c2: f64,
    pub conditional_tv_floor: f64,
    pub dq_tol: f64,
    pub lyapunov_tol: f64,
    pub conjugacy_tol: f64,
    pub chain_l1_max: f64,
    pub chain_n: usize,
    pub chain_n_bins: usize,
}

fn field_error(field: &str, value: impl std::fmt::Display, range: &str) -> CliError {
    CliError::Config(format!("{field} = {value} is outside {range}"))
}

fn check_c(field: &str, c: f64) -> Result<(), CliError> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(field_error(field, c, "(0, 1]"))
    }
}

fn check_k(field: &str, k: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&k) {
        Ok(())
    } else {
        Err(field_error(field, k, "[0, 1]"))
    }
}

fn check_positive_k(field: &str, k: f64) -> Result<(), CliError> {
    if k > 0.0 && k <= 1.0 {
        Ok(())
    } else {
        Err(field_error(field, k, "(0, 1]"))
    }
}

fn check_in_i(field: &str, x: f64) -> Result<(), CliError> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(field_error(field, x, "[-1, 1]"))
    }
}

fn check_count(field: &str, n: usize, min: usize) -> Result<(), CliError> {
    if n >= min {
        Ok(())
    } else {
        Err(field_error(field, n, &format!("[{min}, inf)")))
    }
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, v, "(0, inf)"))
    }
}

fn check_unit(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(field_error(field, v, "(0, 1)"))
    }
}

fn check_k_list(field: &str, ks: &[f64]) -> Result<(), CliError> {
    if ks.is_empty() {
        return Err(CliError::Config(format!("{field} is empty")));
    }
    for (i, &k) in ks.iter().enumerate() {
        check_k(&format!("{field}[{i}]"), k)?;
    }
    Ok(())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// The configuration shipped in `configs/default.toml`.
    pub fn shipped_default() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("shipped default config is valid")
    }

    pub fn h_provider(&self) -> DensityProvider {
        self.common
            .h_provider
            .parse()
            .expect("h_provider checked at load")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.common;
        check_c("common.c1", c.c1)?;
        check_c("common.c2", c.c2)?;
        if c.h_provider.parse::<DensityProvider>().is_err() {
            return Err(CliError::Config(format!(
                "common.h_provider = {:?} is not one of analytic, ulam, orbit-histogram",
                c.h_provider
            )));
        }
        check_count("common.h_budget", c.h_budget, 1)?;

        let s = &self.simulate;
        check_k("simulate.k", s.k)?;
        check_in_i("simulate.x0", s.x0)?;
        check_in_i("simulate.y0", s.y0)?;
        check_count("simulate.n", s.n, 1)?;
        check_count("simulate.orbit_stride", s.orbit_stride, 1)?;
        check_count("simulate.lyapunov_checkpoints", s.lyapunov_checkpoints, 1)?;
        check_positive("simulate.clip", s.clip)?;
        if s.sync_tail < 1 || s.sync_tail > s.n {
            return Err(field_error(
                "simulate.sync_tail",
                s.sync_tail,
                "[1, simulate.n]",
            ));
        }

        let st = &self.stationary;
        if !(st.k > 0.0 && st.k <= 1.0) {
            return Err(field_error("stationary.k", st.k, "(0, 1]"));
        }
        check_count("stationary.n_bins", st.n_bins, 16)?;
        check_count("stationary.samples_per_bin", st.samples_per_bin, 1)?;
        check_positive("stationary.tol", st.tol)?;
        check_count("stationary.max_iter", st.max_iter, 1)?;
        check_count("stationary.trace_steps", st.trace_steps, 1)?;
        if st.f0.is_empty() {
            return Err(CliError::Config("stationary.f0 is empty".into()));
        }
        for (i, f) in st.f0.iter().enumerate() {
            if !matches!(f.as_str(), "uniform" | "point-mass" | "random") {
                return Err(CliError::Config(format!(
                    "stationary.f0[{i}] = {f:?} is not one of uniform, point-mass, random"
                )));
            }
        }

        let ce = &self.certify;
        // k at or above k_* is allowed and reported as out of regime
        check_positive_k("certify.k", ce.k)?;
        check_count("certify.n_bins", ce.n_bins, 16)?;
        check_count("certify.y_grid_points", ce.y_grid_points, 2)?;
        if !(ce.y_grid_max > 0.0 && ce.y_grid_max < 1.0) {
            return Err(field_error("certify.y_grid_max", ce.y_grid_max, "(0, 1)"));
        }
        check_unit("certify.margin", ce.margin)?;
        check_unit("certify.alpha_bar_frac", ce.alpha_bar_frac)?;
        if !(ce.r_frac > 1.0 && ce.r_frac.is_finite()) {
            return Err(field_error("certify.r_frac", ce.r_frac, "(1, inf)"));
        }
        if !(ce.mc_y0.abs() < 1.0) {
            return Err(field_error("certify.mc_y0", ce.mc_y0, "(-1, 1)"));
        }
        check_count("certify.mc_steps", ce.mc_steps, 1)?;
        check_count("certify.mc_reps", ce.mc_reps, 10_000)?;

        let w = &self.weaklimit;
        check_k_list("weaklimit.k_list", &w.k_list)?;
        check_count("weaklimit.n", w.n, 1)?;
        check_count("weaklimit.n_bins", w.n_bins, 1)?;
        if w.burn_in >= w.n {
            return Err(field_error(
                "weaklimit.burn_in",
                w.burn_in,
                "[0, weaklimit.n)",
            ));
        }
        check_in_i("weaklimit.x0", w.x0)?;
        check_in_i("weaklimit.y0", w.y0)?;

        let q = &self.question3;
        check_k_list("question3.k_list", &q.k_list)?;
        if let Some(i) = q.k_list.iter().position(|&k| k == 0.0) {
            return Err(field_error(&format!("question3.k_list[{i}]"), 0, "(0, 1]"));
        }
        check_count("question3.n", q.n, 1)?;
        check_count("question3.n_bins", q.n_bins, 16)?;
        check_count("question3.samples_per_bin", q.samples_per_bin, 1)?;
        check_in_i("question3.x0", q.x0)?;
        check_in_i("question3.y0", q.y0)?;
        if !(0.0..=1.0).contains(&q.tv_floor) {
            return Err(field_error("question3.tv_floor", q.tv_floor, "[0, 1]"));
        }

        let d = &self.dimension;
        check_k_list("dimension.k_list", &d.k_list)?;
        check_count("dimension.n", d.n, skewlab_core::dimension::MIN_POINTS)?;
        check_in_i("dimension.x0", d.x0)?;
        check_in_i("dimension.y0", d.y0)?;
        if d.q_grid.is_empty() {
            return Err(CliError::Config("dimension.q_grid is empty".into()));
        }
        check_positive("dimension.r_min", d.r_min)?;
        if !(d.r_max > d.r_min) {
            return Err(field_error(
                "dimension.r_max",
                d.r_max,
                "(dimension.r_min, inf)",
            ));
        }
        if (d.r_max / d.r_min).log10() < skewlab_core::dimension::MIN_R_SPAN_DECADES {
            return Err(CliError::Config(format!(
                "dimension.r_max / dimension.r_min spans fewer than {} decades",
                skewlab_core::dimension::MIN_R_SPAN_DECADES
            )));
        }
        check_count("dimension.r_points", d.r_points, 2)?;
        if !(0.0..=1.0).contains(&d.min_r_squared) {
            return Err(field_error(
                "dimension.min_r_squared",
                d.min_r_squared,
                "[0, 1]",
            ));
        }

        let u = &self.ulam_dump;
        if !(u.k > 0.0 && u.k <= 1.0) {
            return Err(field_error("ulam_dump.k", u.k, "(0, 1]"));
        }
        check_count("ulam_dump.n_bins", u.n_bins, 16)?;
        check_count("ulam_dump.samples_per_bin", u.samples_per_bin, 1)?;

        let a = &self.acceptance;
        for (name, v) in [
            ("collapse_l1", a.collapse_l1),
            ("uniqueness_l1", a.uniqueness_l1),
            ("uniqueness_power_tol", a.uniqueness_power_tol),
            ("drift_rel_tol", a.drift_rel_tol),
            ("mc_se_multiple", a.mc_se_multiple),
            ("sandwich_tol", a.sandwich_tol),
            ("mad_max", a.mad_max),
            ("cf_gap_max", a.cf_gap_max),
            ("product_l1_max", a.product_l1_max),
            ("dq_tol", a.dq_tol),
            ("lyapunov_tol", a.lyapunov_tol),
            ("conjugacy_tol", a.conjugacy_tol),
            ("chain_l1_max", a.chain_l1_max),
        ] {
            check_positive(&format!("acceptance.{name}"), v)?;
        }
        for (name, v) in [
            ("trace_min_r_squared", a.trace_min_r_squared),
            ("gamma_high_k", a.gamma_high_k),
            ("gamma_low_k", a.gamma_low_k),
            ("conditional_tv_floor", a.conditional_tv_floor),
        ] {
            check_unit(&format!("acceptance.{name}"), v)?;
        }
        check_c("acceptance.product_c2", a.product_c2)?;
        check_count("acceptance.chain_n", a.chain_n, 1)?;
        check_count("acceptance.chain_n_bins", a.chain_n_bins, 16)?;
        Ok(())
    }
}

/// The resolved settings of one run, written before any computation.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub common: Common,
    pub section: toml::Value,
}

impl Manifest {
    pub fn new(cfg: &Config, command: &str) -> Self {
        let section = match command {
            "simulate" => toml::Value::try_from(&cfg.simulate),
            "stationary" => toml::Value::try_from(&cfg.stationary),
            "certify" => toml::Value::try_from(&cfg.certify),
            "weaklimit" => toml::Value::try_from(&cfg.weaklimit),
            "question3" => toml::Value::try_from(&cfg.question3),
            "dimension" => toml::Value::try_from(&cfg.dimension),
            "ulam-dump" => toml::Value::try_from(&cfg.ulam_dump),
            other => panic!("unknown command {other}"),
        }
        .expect("config sections serialize");
        Self {
            tool: format!("skewlab {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            common: cfg.common.clone(),
            section,
        }
    }

    /// SHA-256 over everything that can change results; the output directory
    /// and thread count are excluded.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.common.out = PathBuf::new();
        let hashed = toml::to_string(&hashed).expect("manifest serializes");
        Sha256::digest(hashed.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        let mut text = format!("# manifest sha256={}\n", self.hash());
        text.push_str(&toml::to_string(self).expect("manifest serializes"));
        text
    }
}
