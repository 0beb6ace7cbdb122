//! Generalized dimensions `D_q` of one-dimensional empirical measures.
//!
//! Ball masses `ν(B_r(x_i))` are exact neighbour counts on the sorted sample,
//! closed balls, self included, so every count is at least 1.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::least_squares;

/// Smallest sample accepted by [`dq_estimate`].
pub const MIN_POINTS: usize = 100_000;
/// Minimum ratio `r_max / r_min` (1.5 decades).
pub const MIN_R_SPAN_DECADES: f64 = 1.5;
/// Fits with a squared correlation below this are not reported.
pub const DEFAULT_MIN_R_SQUARED: f64 = 0.99;
/// `q` closer than this to 1 uses the information branch.
pub const Q_ONE_TOLERANCE: f64 = 1e-6;

pub fn default_q_grid() -> Vec<f64> {
    vec![-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0]
}

pub fn default_r_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1e-1, 24)
}

/// `n` geometrically spaced values from `lo` to `hi`, both included.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSpectrum {
    pub q_grid: Vec<f64>,
    pub d_values: Vec<f64>,
    /// Squared correlation of each log-log fit.
    pub r_squared: Vec<f64>,
    pub r_range: (f64, f64),
    pub accepted: Vec<bool>,
}

impl DimensionSpectrum {
    /// `D_q` at grid index `i`, or `None` when the fit was rejected.
    pub fn value(&self, i: usize) -> Option<f64> {
        self.accepted[i].then_some(self.d_values[i])
    }

    /// Re-evaluates acceptance against another correlation threshold.
    pub fn with_min_r_squared(mut self, threshold: f64) -> Self {
        self.accepted = self.r_squared.iter().map(|&r2| r2 >= threshold).collect();
        self
    }
}

/// Number of sample points within distance `r` of each point, itself
/// included. `sorted` must be in nondecreasing order.
pub fn ball_counts(sorted: &[f64], r: f64) -> Vec<u32> {
    sorted
        .par_iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&y| y < x - r);
            let hi = sorted.partition_point(|&y| y <= x + r);
            (hi - lo) as u32
        })
        .collect()
}

pub fn dq_estimate(points: &[f64], q_grid: &[f64], r_grid: &[f64]) -> Result<DimensionSpectrum> {
    if points.len() < MIN_POINTS {
        return Err(Error::InputSize(format!(
            "{} points, at least {MIN_POINTS} required",
            points.len()
        )));
    }
    if let Some(&bad) = points.iter().find(|x| !(x.abs() <= 1.0)) {
        return Err(Error::domain("point", bad, "[-1, 1]"));
    }
    if r_grid.len() < 2 || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InputSize(
            "r_grid needs at least two positive radii".into(),
        ));
    }
    let r_min = r_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    if (r_max / r_min).log10() < MIN_R_SPAN_DECADES - 1e-9 {
        return Err(Error::InputSize(format!(
            "r_grid spans {:.3} decades, at least {MIN_R_SPAN_DECADES} required",
            (r_max / r_min).log10()
        )));
    }
    if q_grid.is_empty() {
        return Err(Error::InputSize("empty q_grid".into()));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;

    // responses[qi][ri]
    let mut responses = vec![Vec::with_capacity(r_grid.len()); q_grid.len()];
    for &r in r_grid {
        let counts = ball_counts(&sorted, r);
        for (qi, &q) in q_grid.iter().enumerate() {
            let y = if (q - 1.0).abs() < Q_ONE_TOLERANCE {
                counts.iter().map(|&c| (c as f64 / n).ln()).sum::<f64>() / n
            } else {
                let s = counts
                    .iter()
                    .map(|&c| (c as f64 / n).powf(q - 1.0))
                    .sum::<f64>()
                    / n;
                s.ln()
            };
            if !y.is_finite() {
                return Err(Error::InputSize(format!(
                    "non-finite correlation sum at r={r}"
                )));
            }
            responses[qi].push((r.ln(), y));
        }
    }

    let mut d_values = Vec::with_capacity(q_grid.len());
    let mut r_squared = Vec::with_capacity(q_grid.len());
    for (qi, &q) in q_grid.iter().enumerate() {
        let (slope, _, r2) = least_squares(&responses[qi]);
        let d = if (q - 1.0).abs() < Q_ONE_TOLERANCE {
            slope
        } else {
            slope / (q - 1.0)
        };
        d_values.push(d);
        r_squared.push(r2);
    }
    let accepted = r_squared
        .iter()
        .map(|&r2| r2 >= DEFAULT_MIN_R_SQUARED)
        .collect();
    Ok(DimensionSpectrum {
        q_grid: q_grid.to_vec(),
        d_values,
        r_squared,
        r_range: (r_min, r_max),
        accepted,
    })
}

/// `|D_q(master) − D_q(slave)|` per `q`.
pub fn delta_dq(master: &DimensionSpectrum, slave: &DimensionSpectrum) -> Result<Vec<(f64, f64)>> {
    if master.q_grid != slave.q_grid {
        return Err(Error::Shape {
            left: master.q_grid.len(),
            right: slave.q_grid.len(),
        });
    }
    Ok(master
        .q_grid
        .iter()
        .zip(master.d_values.iter().zip(&slave.d_values))
        .map(|(&q, (a, b))| (q, (a - b).abs()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform_points(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::seeded(seed, 0);
        (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
    }

    #[test]
    fn self_count_steps_at_distance() {
        let d = 0.25;
        let pts = [0.1, 0.1 + d];
        assert_eq!(ball_counts(&pts, d * (1.0 - 1e-9)), vec![1, 1]);
        assert_eq!(ball_counts(&pts, d), vec![2, 2]);
    }

    #[test]
    fn uniform_is_flat_one() {
        let pts = uniform_points(200_000, 3);
        let s = dq_estimate(&pts, &default_q_grid(), &default_r_grid()).unwrap();
        for (i, q) in s.q_grid.iter().enumerate() {
            let d = s.value(i).unwrap();
            assert!((d - 1.0).abs() < 0.05, "q={q} D={d}");
        }
    }

    #[test]
    fn atom_is_zero() {
        let pts = vec![0.3; MIN_POINTS];
        let s = dq_estimate(&pts, &default_q_grid(), &default_r_grid()).unwrap();
        for i in 0..s.q_grid.len() {
            assert_eq!(s.value(i), Some(0.0));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dq_estimate(&[0.0; 10], &[0.0], &default_r_grid()).is_err());
        let pts = uniform_points(MIN_POINTS, 1);
        assert!(dq_estimate(&pts, &[0.0], &geometric_grid(1e-2, 1e-1, 5)).is_err());
        assert!(dq_estimate(&pts, &[], &default_r_grid()).is_err());
    }

    #[test]
    fn delta_of_same_spectrum_is_zero() {
        let pts = uniform_points(MIN_POINTS, 5);
        let s = dq_estimate(&pts, &[-2.0, 2.0], &default_r_grid()).unwrap();
        assert!(delta_dq(&s, &s).unwrap().iter().all(|&(_, d)| d == 0.0));
        let other = dq_estimate(&pts, &[0.0], &default_r_grid()).unwrap();
        assert!(delta_dq(&s, &other).is_err());
    }
}
