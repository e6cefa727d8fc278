//! Least-squares quadratic model `s(τ) = c3 τ² + c2 τ + c1` of a signal window.
//!
//! τ is the time since the window's reference time in seconds. The normal
//! matrix is accumulated from power sums of the sample times and solved in
//! closed form. Times are first mapped onto [-1, 1] over the sampled range so
//! the system stays well conditioned even when the samples are bunched far
//! from the reference time; the coefficients are then re-expanded about it.

use thiserror::Error;

use crate::linalg::solve3;
use crate::signal::{Micros, Sample, SignalWindow};
use crate::Scalar;

/// Extrapolating further than this past the window is reported as such.
pub const EXTRAPOLATION_WARN_US: Micros = 100_000;

/// Smallest accepted |det(TᵀT)| of the range-normalised system.
pub const DET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FitError {
    #[error("{found} samples, at least 3 required")]
    InsufficientSamples { found: usize },
    #[error("normal matrix is singular (normalised det = {det:e})")]
    Degenerate { det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticModel<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub t_ref: Micros,
    pub t_frame: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    pub extrapolated: bool,
}

impl<T: Scalar> QuadraticModel<T> {
    /// A model that returns `value` everywhere.
    pub fn constant(value: T, t_ref: Micros, t_frame: Micros) -> Self {
        Self {
            c1: value,
            c2: T::zero(),
            c3: T::zero(),
            t_ref,
            t_frame,
        }
    }

    /// Value at `tau` seconds after `t_ref`.
    #[inline]
    pub fn eval_offset(&self, tau: T) -> T {
        (self.c3 * tau + self.c2) * tau + self.c1
    }

    pub fn evaluate(&self, t: Micros) -> T {
        self.eval_offset(T::from_micros(t - self.t_ref))
    }

    pub fn evaluate_flagged(&self, t: Micros) -> Evaluation<T> {
        Evaluation {
            value: self.evaluate(t),
            extrapolated: self.is_far_extrapolation(t),
        }
    }

    /// True when `t` lies more than [`EXTRAPOLATION_WARN_US`] outside the window.
    pub fn is_far_extrapolation(&self, t: Micros) -> bool {
        t > self.t_frame + EXTRAPOLATION_WARN_US || t < self.t_ref - EXTRAPOLATION_WARN_US
    }

    /// Sum of squared residuals over `samples`.
    pub fn residual(&self, samples: &[(Micros, T)]) -> T {
        samples.iter().fold(T::zero(), |acc, &(t, s)| {
            let e = s - self.evaluate(t);
            acc + e * e
        })
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite() && self.c3.is_finite()
    }
}

/// Fits the window's samples with `t_ref`/`t_frame` taken from the window.
pub fn fit<T: Scalar>(window: &SignalWindow) -> Result<QuadraticModel<T>, FitError> {
    fit_samples(&window.samples, window.t_ref, window.t_frame)
}

pub fn fit_samples<T: Scalar>(
    samples: &[Sample],
    t_ref: Micros,
    t_frame: Micros,
) -> Result<QuadraticModel<T>, FitError> {
    let points: Vec<(Micros, T)> = samples.iter().map(|s| (s.t, T::lit(s.value))).collect();
    fit_points(&points, t_ref, t_frame)
}

/// Ordinary least squares over `(timestamp, value)` points.
pub fn fit_points<T: Scalar>(
    points: &[(Micros, T)],
    t_ref: Micros,
    t_frame: Micros,
) -> Result<QuadraticModel<T>, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::InsufficientSamples { found: n });
    }
    let lo = points.iter().map(|p| p.0).min().unwrap_or(0);
    let hi = points.iter().map(|p| p.0).max().unwrap_or(0);
    if hi == lo {
        return Err(FitError::Degenerate { det: 0.0 });
    }
    // Power sums of u = (t - centre) / half over the sampled time range.
    let half = T::from_micros(hi - lo) * T::lit(0.5);
    let centre = T::from_micros(lo - t_ref) + half;
    let u_of = |t: Micros| (T::from_micros(t - t_ref) - centre) / half;
    let mut pow = [T::zero(); 5];
    let mut rhs = [T::zero(); 3];
    for &(t, s) in points {
        let u = u_of(t);
        let u2 = u * u;
        pow[0] += T::one();
        pow[1] += u;
        pow[2] += u2;
        pow[3] += u2 * u;
        pow[4] += u2 * u2;
        rhs[0] += u2 * s;
        rhs[1] += u * s;
        rhs[2] += s;
    }
    let normal = [
        [pow[4], pow[3], pow[2]],
        [pow[3], pow[2], pow[1]],
        [pow[2], pow[1], pow[0]],
    ];
    let Some(([mut a, mut b, mut c], det)) = solve3(&normal, &rhs) else {
        return Err(FitError::Degenerate { det: 0.0 });
    };
    if det.abs() < T::lit(DET_TOLERANCE) {
        return Err(FitError::Degenerate {
            det: det.to_f64_lossy(),
        });
    }
    // One step of iterative refinement on the residuals.
    let mut grad = [T::zero(); 3];
    for &(t, s) in points {
        let u = u_of(t);
        let r = s - ((a * u + b) * u + c);
        grad[0] += u * u * r;
        grad[1] += u * r;
        grad[2] += r;
    }
    if let Some(([da, db, dc], _)) = solve3(&normal, &grad) {
        a += da;
        b += db;
        c += dc;
    }
    // s = a u² + b u + c with u = (τ - k half) / half, re-expanded in τ.
    let k = centre / half;
    let model = QuadraticModel {
        c1: (a * k - b) * k + c,
        c2: (b - T::lit(2.0) * a * k) / half,
        c3: a / (half * half),
        t_ref,
        t_frame,
    };
    if !model.is_finite() {
        return Err(FitError::Degenerate {
            det: det.to_f64_lossy(),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples_of(f: impl Fn(f64) -> f64, times_ms: &[i64]) -> Vec<Sample> {
        times_ms
            .iter()
            .map(|&ms| Sample::new(ms * 1000, f(ms as f64 / 1000.0)))
            .collect()
    }

    #[test]
    fn recovers_exact_quadratic() {
        let s = samples_of(|t| 2.0 * t * t + 3.0 * t + 1.0, &[0, 50, 100, 150]);
        let m: QuadraticModel<f64> = fit_samples(&s, 0, 200_000).unwrap();
        assert!((m.c3 - 2.0).abs() < 1e-9);
        assert!((m.c2 - 3.0).abs() < 1e-9);
        assert!((m.c1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_signal() {
        let s = samples_of(|_| 5.0, &[3, 71, 140, 199]);
        let m: QuadraticModel<f64> = fit_samples(&s, 0, 200_000).unwrap();
        assert!(m.c3.abs() < 1e-9 && m.c2.abs() < 1e-9);
        assert!((m.c1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_substitutes_seconds() {
        let m: QuadraticModel<f64> = QuadraticModel {
            c1: 1.0,
            c2: 3.0,
            c3: 2.0,
            t_ref: 7_000,
            t_frame: 207_000,
        };
        assert_eq!(m.evaluate(7_000), 1.0);
        assert!((m.evaluate(107_000) - 1.32).abs() < 1e-12);
        assert!(!m.evaluate_flagged(300_000).extrapolated);
        assert!(m.evaluate_flagged(307_001).extrapolated);
    }

    #[test]
    fn three_points_interpolate_and_reproduce_inputs() {
        let s = samples_of(|t| -4.0 * t * t + 0.5 * t - 2.0, &[10, 90, 170]);
        let m: QuadraticModel<f64> = fit_samples(&s, 0, 200_000).unwrap();
        for x in &s {
            assert!((m.evaluate(x.t) - x.value).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_or_coincident_samples_fail() {
        let s = samples_of(|t| t, &[0, 100]);
        assert_eq!(
            fit_samples::<f64>(&s, 0, 200_000),
            Err(FitError::InsufficientSamples { found: 2 })
        );
        let s = vec![Sample::new(50_000, 1.0); 4];
        assert!(matches!(fit_samples::<f64>(&s, 0, 200_000), Err(FitError::Degenerate { .. })));
        // two distinct times only: rank 2
        let s = samples_of(|t| t, &[10, 10, 100, 100]);
        assert!(matches!(fit_samples::<f64>(&s, 0, 200_000), Err(FitError::Degenerate { .. })));
    }

    #[test]
    fn single_precision_fit() {
        let s = samples_of(|t| 0.3 * t * t - 0.1 * t + 0.25, &[0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200]);
        let m: QuadraticModel<f32> = fit_samples(&s, 0, 200_000).unwrap();
        assert!((m.c1 - 0.25).abs() < 1e-5);
        assert!((m.c2 + 0.1).abs() < 1e-3);
    }
}
