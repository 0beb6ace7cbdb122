use thiserror::Error;

use crate::density::DensityOnI;

pub type Result<T> = std::result::Result<T, Error>;

/// Direction in which an empirical rate fit failed to find usable data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFailure {
    /// Distance dropped below the window floor before enough points were seen.
    TooFast,
    /// Distance never entered the window within the step budget.
    TooSlow,
}

impl std::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitFailure::TooFast => "too-fast",
            FitFailure::TooSlow => "too-slow",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("shape mismatch: {left} bins vs {right} bins")]
    Shape { left: usize, right: usize },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error(
        "power iteration did not converge in {iterations} steps (last L1 change {last_change:e})"
    )]
    Convergence {
        iterations: usize,
        last_change: f64,
        last: Box<DensityOnI>,
    },

    #[error("Ulam assembly failed: row {row} sums to {sum}")]
    Assembly { row: usize, sum: f64 },

    #[error("x-bin {bin} has only {visits} visits (need at least {required})")]
    InsufficientVisits {
        bin: usize,
        visits: usize,
        required: usize,
    },

    #[error("rate fit window is empty ({failure:?}); distances span [{min_distance:e}, {max_distance:e}]")]
    FitWindow {
        failure: FitFailure,
        min_distance: f64,
        max_distance: f64,
    },

    #[error("coupling k = {k} is outside the certified regime (0, {k_star})")]
    OutOfRegime { k: f64, k_star: f64 },

    #[error("minorization envelope is degenerate: alpha = {alpha:e}")]
    Envelope { alpha: f64 },

    #[error("input size: {0}")]
    InputSize(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}

pub(crate) fn check_coupling(k: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&k)
    } else {
        k > 0.0 && k <= 1.0
    };
    if ok {
        Ok(())
    } else if allow_zero {
        Err(Error::domain("k", k, "[0, 1]"))
    } else {
        Err(Error::domain("k", k, "(0, 1]"))
    }
}

pub(crate) fn check_in_interval(what: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, x, "[-1, 1]"))
    }
}
