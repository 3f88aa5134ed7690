//! Chebyshev approximation of the spike step and its encrypted evaluation.

mod encrypted;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use encrypted::{eval_series_encrypted, scale_to_interval, series_depth};

use crate::error::{Error, Result};

/// Default series degree for the step approximation.
pub const DEFAULT_DEGREE: usize = 50;

/// Error tolerance that defines the dead zone of a step fit.
pub const DEAD_ZONE_TOLERANCE: f64 = 0.05;

/// Grid size used when measuring the dead zone.
pub const DEAD_ZONE_GRID: usize = 10_000;

/// `T_n(x)` by the three-term recurrence.
pub fn cheb_recurrence(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}

/// `Σ c_n T_n(x)` by Clenshaw's backward recurrence.
pub fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Damping applied to projected coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taper {
    None,
    /// `σ_n = cos(πn / (2(N+1)))`; suppresses Gibbs ringing near the jump.
    Cosine,
}

/// Truncated Chebyshev series on `[-1, 1]` approximating `x > threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
    threshold: f64,
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>, threshold: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter("series needs at least one coefficient".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(alloc::format!("non-finite coefficient {c}")));
        }
        if !(threshold > -1.0 && threshold < 1.0) {
            return Err(Error::Domain(alloc::format!("threshold {threshold} outside (-1, 1)")));
        }
        Ok(ChebyshevSeries { coeffs, threshold })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, x)
    }
    /// Multiplicative depth of [`eval_series_encrypted`] for this series.
    pub fn depth(&self) -> usize {
        series_depth(self.degree())
    }
}

/// Degree-`degree` projection of `f` onto `T_0..T_degree` by Chebyshev–Gauss
/// quadrature at `4·degree` nodes.
pub fn fit_function(f: impl Fn(f64) -> f64, degree: usize) -> Vec<f64> {
    let m = 4 * degree.max(1);
    let samples: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let theta = (k as f64 + 0.5) * PI / m as f64;
            (theta, f(libm::cos(theta)))
        })
        .collect();
    (0..=degree)
        .map(|j| {
            let s: f64 = samples.iter().map(|&(t, y)| y * libm::cos(j as f64 * t)).sum();
            let c = 2.0 * s / m as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

/// Indicator `1[x > threshold]` used as the spike function.
pub fn step(threshold: f64) -> impl Fn(f64) -> f64 {
    move |x| if x > threshold { 1.0 } else { 0.0 }
}

/// Step fit with the default cosine taper.
pub fn fit_step(threshold: f64, degree: usize) -> Result<ChebyshevSeries> {
    fit_step_with(threshold, degree, Taper::Cosine)
}

pub fn fit_step_with(threshold: f64, degree: usize, taper: Taper) -> Result<ChebyshevSeries> {
    if !(threshold > -1.0 && threshold < 1.0) {
        return Err(Error::Domain(alloc::format!("threshold {threshold} outside (-1, 1)")));
    }
    if degree < 3 {
        return Err(Error::Parameter(alloc::format!("series degree {degree} below 3")));
    }
    let mut c = fit_function(step(threshold), degree);
    if taper == Taper::Cosine {
        for (n, cn) in c.iter_mut().enumerate() {
            *cn *= libm::cos(PI * n as f64 / (2.0 * (degree + 1) as f64));
        }
    }
    ChebyshevSeries::new(c, threshold)
}

/// Measured accuracy of a step fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadZone {
    /// Smallest `δ` with error ≤ `tolerance` at every grid point `|x - Th| > δ`.
    pub half_width: f64,
    /// Largest error over the grid outside the dead zone.
    pub max_error_outside: f64,
    /// Range of series values over the whole grid.
    pub min_value: f64,
    pub max_value: f64,
}

/// Dead zone of `series` against its step on a uniform grid over `[-1, 1]`.
pub fn measure_dead_zone(series: &ChebyshevSeries, tolerance: f64, grid: usize) -> DeadZone {
    let f = step(series.threshold);
    let pts: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
            (x, series.eval(x))
        })
        .collect();
    let half_width = pts
        .iter()
        .filter(|&&(x, y)| (y - f(x)).abs() > tolerance)
        .map(|&(x, _)| (x - series.threshold).abs())
        .fold(0.0, f64::max);
    let max_error_outside = pts
        .iter()
        .filter(|&&(x, _)| (x - series.threshold).abs() > half_width)
        .map(|&(x, y)| (y - f(x)).abs())
        .fold(0.0, f64::max);
    let (min_value, max_value) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    DeadZone {
        half_width,
        max_error_outside,
        min_value,
        max_value,
    }
}

/// Dead zone with the default tolerance and grid.
pub fn dead_zone(series: &ChebyshevSeries) -> DeadZone {
    measure_dead_zone(series, DEAD_ZONE_TOLERANCE, DEAD_ZONE_GRID)
}

/// Values of `T_0..=T_n` at `x`; used by tests as a direct oracle.
pub fn cheb_basis(n: usize, x: f64) -> Vec<f64> {
    let mut t = vec![1.0; n + 1];
    if n >= 1 {
        t[1] = x;
    }
    for k in 2..=n {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recurrence_examples() {
        assert_eq!(cheb_recurrence(0, 0.3), 1.0);
        assert!((cheb_recurrence(2, 0.5) - libm::cos(2.0 * libm::acos(0.5))).abs() < 1e-15);
        assert!((cheb_recurrence(2, 0.5) + 0.5).abs() < 1e-15);
        for n in [5usize, 15, 50] {
            for k in 0..=n {
                let x = libm::cos(k as f64 * PI / n as f64);
                assert!((cheb_recurrence(n, x).abs() - 1.0).abs() < 1e-9, "n={n} k={k}");
            }
            for k in 0..n {
                let x = libm::cos((k as f64 + 0.5) * PI / n as f64);
                assert!(cheb_recurrence(n, x).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn recurrence_matches_cosine_form(n in 0usize..60, x in -1.0f64..=1.0) {
            let want = libm::cos(n as f64 * libm::acos(x));
            prop_assert!((cheb_recurrence(n, x) - want).abs() < 1e-12);
        }

        #[test]
        fn clenshaw_matches_direct_sum(c in prop::collection::vec(-1.0f64..1.0, 1..40), x in -1.0f64..=1.0) {
            let t = cheb_basis(c.len() - 1, x);
            let direct: f64 = c.iter().zip(&t).map(|(a, b)| a * b).sum();
            prop_assert!((clenshaw(&c, x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_fit() {
        let c = fit_function(|_| 1.0, 3);
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn default_degree_step() {
        let s = fit_step(0.0, DEFAULT_DEGREE).unwrap();
        assert_eq!(s.degree(), 50);
        assert!((s.eval(0.5) - 1.0).abs() < 0.05);
        assert!(s.eval(-0.5).abs() < 0.05);
        assert_eq!(s.depth(), 7);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(fit_step(1.0, 50), Err(Error::Domain(_))));
        assert!(matches!(fit_step(-1.5, 50), Err(Error::Domain(_))));
        assert!(matches!(fit_step(0.0, 2), Err(Error::Parameter(_))));
    }

    /// Error ≤ 0.05 outside the measured dead zone for every tested degree and
    /// threshold; the degree-50 dead zone is at most 0.06.
    #[test]
    fn dead_zone_invariant() {
        for degree in [15usize, 27, 50] {
            for th in [0.0, 0.0625] {
                let s = fit_step(th, degree).unwrap();
                let dz = dead_zone(&s);
                assert!(dz.max_error_outside <= 0.05, "N={degree} th={th}: {dz:?}");
                if degree == 50 {
                    assert!(dz.half_width <= 0.06, "N=50 th={th}: {dz:?}");
                    assert!(dz.min_value >= -0.05 && dz.max_value <= 1.05, "{dz:?}");
                }
            }
        }
        let raw = dead_zone(&fit_step_with(0.0, 50, Taper::None).unwrap());
        assert!(raw.half_width > 0.06, "untapered fit unexpectedly sharp: {raw:?}");
    }
}
