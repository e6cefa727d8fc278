mod common;

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use vehodo::quadfit::fit_points;
use vehodo::Micros;

const WINDOW: Micros = 200_000;

fn sample_times(min: usize, max: usize) -> impl Strategy<Value = Vec<Micros>> {
    btree_set(0..=WINDOW, min..=max).prop_map(|s| s.into_iter().collect())
}

fn value_at(c: [f64; 3], t: Micros) -> f64 {
    let tau = t as f64 * 1e-6;
    c[2] * tau * tau + c[1] * tau + c[0]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #[test]
    fn recovers_exact_quadratics(
        times in sample_times(3, 30),
        c in (-20.0..20.0f64, -20.0..20.0f64, -100.0..100.0f64),
    ) {
        let c = [c.0, c.1, c.2];
        let pts: Vec<(Micros, f64)> = times.iter().map(|&t| (t, value_at(c, t))).collect();
        let m = fit_points::<f64>(&pts, 0, WINDOW).unwrap();
        prop_assert!(close(m.c1, c[0], 1e-9) && close(m.c2, c[1], 1e-9) && close(m.c3, c[2], 1e-9), "{m:?} vs {c:?}");
    }

    #[test]
    fn matches_rational_oracle(
        times in sample_times(3, 20),
        values in vec(-5.0..5.0f64, 20),
    ) {
        let pts: Vec<(Micros, f64)> = times.iter().zip(&values).map(|(&t, &v)| (t, v)).collect();
        let m = fit_points::<f64>(&pts, 0, WINDOW).unwrap();
        let o = common::exact_quadratic_fit(&pts, 0);
        prop_assert!(close(m.c1, o[0], 1e-9) && close(m.c2, o[1], 1e-9) && close(m.c3, o[2], 1e-9), "{m:?} vs {o:?}");
    }

    #[test]
    fn fit_is_locally_optimal(
        times in sample_times(4, 15),
        values in vec(-5.0..5.0f64, 15),
        perturb in vec((-1e-3..1e-3f64, -1e-2..1e-2f64, -1e-1..1e-1f64), 50),
    ) {
        let pts: Vec<(Micros, f64)> = times.iter().zip(&values).map(|(&t, &v)| (t, v)).collect();
        let m = fit_points::<f64>(&pts, 0, WINDOW).unwrap();
        let best = m.residual(&pts);
        for (d1, d2, d3) in perturb {
            let mut p = m;
            p.c1 += d1;
            p.c2 += d2;
            p.c3 += d3;
            prop_assert!(best <= p.residual(&pts) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn time_shift_equivariance(
        times in sample_times(3, 15),
        values in vec(-5.0..5.0f64, 15),
        shift in -50_000i64..50_000,
        probe in 0..=WINDOW,
    ) {
        let pts: Vec<(Micros, f64)> = times.iter().zip(&values).map(|(&t, &v)| (t, v)).collect();
        let a = fit_points::<f64>(&pts, 0, WINDOW).unwrap();
        let b = fit_points::<f64>(&pts, shift, WINDOW + shift).unwrap();
        let (va, vb) = (a.evaluate(probe), b.evaluate(probe));
        prop_assert!(close(va, vb, 1e-9), "{va} vs {vb}");
    }

    #[test]
    fn three_samples_interpolate(
        times in sample_times(3, 3),
        values in vec(-5.0..5.0f64, 3),
    ) {
        let pts: Vec<(Micros, f64)> = times.iter().zip(&values).map(|(&t, &v)| (t, v)).collect();
        let m = fit_points::<f64>(&pts, 0, WINDOW).unwrap();
        prop_assert!(m.residual(&pts) < 1e-9);
    }
}
