//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::Vector2;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use vehodo::estimate::frame_signals;
use vehodo::planar::PlanarPose;
use vehodo::{Geometry, Micros, SignalLog, Trajectory};

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Exact least-squares `(c1, c2, c3)` of `c3 τ² + c2 τ + c1`, τ in seconds
/// after `t_ref`, solved in rational arithmetic from the exact inputs.
pub fn exact_quadratic_fit(points: &[(Micros, f64)], t_ref: Micros) -> [f64; 3] {
    let million = BigRational::from_integer(BigInt::from(1_000_000));
    let mut s = vec![BigRational::zero(); 5];
    let mut b = vec![BigRational::zero(); 3];
    for &(t, v) in points {
        let tau = BigRational::from_integer(BigInt::from(t - t_ref)) / &million;
        let v = rational(v);
        let mut p = BigRational::from_integer(BigInt::from(1));
        for k in 0..5 {
            s[k] += &p;
            if k < 3 {
                b[k] += &p * &v;
            }
            p *= &tau;
        }
    }
    // Unknowns (c1, c2, c3); row k is Σ τ^k (c1 + c2 τ + c3 τ²) = Σ τ^k v.
    let m = [
        [s[0].clone(), s[1].clone(), s[2].clone()],
        [s[1].clone(), s[2].clone(), s[3].clone()],
        [s[2].clone(), s[3].clone(), s[4].clone()],
    ];
    let det3 = |m: &[[BigRational; 3]; 3]| -> BigRational {
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    };
    let det = det3(&m);
    assert!(!det.is_zero(), "oracle system is singular");
    std::array::from_fn(|col| {
        let mut mc = m.clone();
        for row in 0..3 {
            mc[row][col] = b[row].clone();
        }
        (det3(&mc) / &det).to_f64().expect("representable")
    })
}

/// Distance from `p` to the polyline by dense sampling of every segment,
/// refined with a ternary search around the best sample.
pub fn brute_point_to_polyline(p: &Vector2<f64>, points: &[Vector2<f64>]) -> f64 {
    const SAMPLES: usize = 2000;
    let dist = |a: &Vector2<f64>, b: &Vector2<f64>, u: f64| (a + (b - a) * u - p).norm();
    if points.len() == 1 {
        return (points[0] - p).norm();
    }
    let mut best = f64::INFINITY;
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut k_best = 0;
        let mut d_best = f64::INFINITY;
        for k in 0..=SAMPLES {
            let d = dist(a, b, k as f64 / SAMPLES as f64);
            if d < d_best {
                d_best = d;
                k_best = k;
            }
        }
        let mut lo = k_best.saturating_sub(1) as f64 / SAMPLES as f64;
        let mut hi = ((k_best + 1).min(SAMPLES)) as f64 / SAMPLES as f64;
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(a, b, m1) < dist(a, b, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(d_best).min(dist(a, b, 0.5 * (lo + hi)));
    }
    best
}

/// Moves `est` so that its first pose coincides with the reference at the same time.
pub fn align(est: &Trajectory, reference: &Trajectory) -> Trajectory {
    let first = est.first().expect("non-empty estimate");
    let start = reference.interpolate(first.t).expect("non-empty reference");
    est.rigidly_moved(first, &start)
}

pub fn wrap(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Continuous-time reading of the four-wheel model: at every instant the
/// turning centre lies on the rear-axle line at the mean of the per-wheel
/// lateral offsets implied by `r_i = v_i / ω`, and the datum moves at `R ω`.
pub fn datum_speed(yaw_rate: f64, speeds: [f64; 4], geom: &Geometry) -> f64 {
    if yaw_rate.abs() < 1e-12 {
        return speeds.iter().sum::<f64>() / 4.0;
    }
    let radii = speeds.map(|v| v / yaw_rate);
    let side = if radii.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let wheels = geom.wheel_positions();
    let mut sum = 0.0;
    for (w, r) in wheels.iter().zip(radii) {
        let along = (r * r - w.x * w.x).max(0.0).sqrt();
        sum += w.y + side * along;
    }
    (sum / 4.0) * yaw_rate
}

/// Integrates the same per-frame quadratic models as the estimator with a
/// fixed `step_us` midpoint rule on the unicycle equations.
pub fn fine_step_oracle(
    log: &SignalLog,
    geom: &Geometry,
    frames: &[Micros],
    window_us: Micros,
    step_us: Micros,
) -> PlanarPose<f64> {
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    for w in frames.windows(2) {
        let signals = frame_signals::<f64>(log, w[1], window_us).expect("signals fit");
        let rates = |t: f64| -> (f64, f64) {
            let at = |m: &vehodo::Quadratic| m.eval_offset(t - (m.t_ref as f64) * 1e-6);
            let omega = at(&signals.yaw_rate);
            let v = datum_speed(omega, signals.wheel_speeds.each_ref().map(at), geom);
            (omega, v)
        };
        let mut t = w[0];
        while t < w[1] {
            let h_us = step_us.min(w[1] - t);
            let h = h_us as f64 * 1e-6;
            let t0 = t as f64 * 1e-6;
            let (om0, _) = rates(t0);
            let thm = th + 0.5 * h * om0;
            let (omm, vm) = rates(t0 + 0.5 * h);
            x += h * vm * thm.cos();
            y += h * vm * thm.sin();
            th += h * omm;
            t += h_us;
        }
    }
    PlanarPose::new(x, y, th, *frames.last().expect("frames"))
}
