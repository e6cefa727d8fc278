//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use vehodo::estimate::{
    estimate, frame_times, height_and_pitch, EstimatorConfig, Model, DEFAULT_FRAME_PERIOD_US, DEFAULT_WINDOW_US,
};
use vehodo::io::trajectory_to_csv;
use vehodo::metrics::{e_loc, evaluate, point_to_polyline, Denominator};
use vehodo::planar::{
    accumulate, integrate_frame, FrameSignals, IntegrationConfig, MotionDelta, PlanarPose,
};
use vehodo::quadfit::{fit_points, QuadraticModel};
use vehodo::simulator::scenarios::{circle, figure_of_eight, load_sweep};
use vehodo::simulator::{simulate, simulate_load, ChannelRate, ManoeuvreSpec, Segment, SignalRates};
use vehodo::suspension::{
    compensated_sensor_pose, fit_plane, fit_plane_points, is_rotation, rotation_between, rotation_z,
    sensor_pose_world, SensorExtrinsics, SuspensionFrame,
};
use vehodo::{Geometry, Micros, Trajectory};

use common::{align, brute_point_to_polyline, exact_quadratic_fit, fine_step_oracle, wrap};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn geom() -> Geometry {
    Geometry::passenger_car()
}

/// Absolute agreement for coefficients near unit size, relative above.
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn quadratic_exactness() -> Outcome {
    const WINDOW: Micros = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut cases = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let n = rng.random_range(3..=25);
        let mut times: Vec<Micros> = Vec::with_capacity(n);
        while times.len() < n {
            let t = rng.random_range(0..=WINDOW);
            if !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_unstable();
        let c = [
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-100.0..100.0),
        ];
        let exact: Vec<(Micros, f64)> = times
            .iter()
            .map(|&t| {
                let tau = t as f64 * 1e-6;
                (t, c[2] * tau * tau + c[1] * tau + c[0])
            })
            .collect();
        let noisy: Vec<(Micros, f64)> = exact.iter().map(|&(t, v)| (t, v + noise.sample(&mut rng))).collect();
        cases.push((c, exact, noisy));
    }

    let start = Instant::now();
    let fits: Vec<_> = cases
        .iter()
        .map(|(_, exact, noisy)| {
            (
                fit_points::<f64>(exact, 0, WINDOW).unwrap(),
                fit_points::<f64>(noisy, 0, WINDOW).unwrap(),
            )
        })
        .collect();
    let elapsed = start.elapsed();

    let mut worst_exact = 0.0f64;
    let mut worst_noisy = 0.0f64;
    let mut failures = 0;
    for ((c, _, noisy), (fe, fnz)) in cases.iter().zip(&fits) {
        let got = [fe.c1, fe.c2, fe.c3];
        let oracle = exact_quadratic_fit(noisy, 0);
        let got_noisy = [fnz.c1, fnz.c2, fnz.c3];
        for k in 0..3 {
            worst_exact = worst_exact.max((got[k] - c[k]).abs() / c[k].abs().max(1.0));
            worst_noisy = worst_noisy.max((got_noisy[k] - oracle[k]).abs() / oracle[k].abs().max(1.0));
            if !close(got[k], c[k], 1e-9) || !close(got_noisy[k], oracle[k], 1e-9) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0 && elapsed < Duration::from_secs(1),
        format!(
            "2000 fits in {:.1} ms; worst exact {worst_exact:.1e}, worst vs rational oracle {worst_noisy:.1e}",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn circle_round_trip() -> Outcome {
    let g = geom();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_pos = 0.0f64;
    let mut worst_heading = 0.0f64;
    let mut estimate_time = Duration::ZERO;
    let mut pass = true;
    let mut i = 0;
    for radius in [5.0, 10.0, 25.0, 100.0] {
        for speed in [1.0, 2.0, 5.0] {
            let revs = 1.0 + (i % 4) as f64;
            i += 1;
            let direction = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut spec = circle(direction * radius, speed, revs);
            let mut period = || ChannelRate::every(rng.random_range(20..=40) * 1000);
            spec.rates = SignalRates {
                yaw_rate: period(),
                wheel_speed: period(),
                wheel_tick: Some(period()),
                wheel_dir: Some(period()),
                front_wheel_angle: Some(period()),
                susp_height: None,
            };
            spec.seed = i as u64;
            let sim = simulate(&spec, &g, 10_000).unwrap();

            let start = Instant::now();
            let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
            let est = estimate(&sim.log, &g, &frames, &EstimatorConfig::default()).unwrap();
            estimate_time += start.elapsed();

            let est = align(&est.trajectory, &sim.truth);
            let last = est.last().unwrap();
            let truth = sim.truth.interpolate(last.t).unwrap();
            let path = speed * (last.t - frames[0]) as f64 * 1e-6;
            let pos = (last.position - truth.position).norm() / path;
            let heading = wrap(last.heading - truth.heading).abs().to_degrees();
            worst_pos = worst_pos.max(pos);
            worst_heading = worst_heading.max(heading);
            if pos >= 1e-3 || heading >= 0.05 {
                pass = false;
            }
        }
    }
    outcome(
        pass && estimate_time < Duration::from_secs(5),
        format!(
            "12 circles; worst final error {:.2e} of path, {worst_heading:.2e} deg; estimation {:.2} s",
            worst_pos,
            estimate_time.as_secs_f64()
        ),
    )
}

/// Smooth manoeuvre with acceleration, jerk and changing curvature, about 10 m long.
fn jerk_manoeuvre() -> ManoeuvreSpec {
    ManoeuvreSpec::new(vec![Segment {
        duration: 3.5,
        v0: Some(1.5),
        accel: 0.6,
        jerk: 0.3,
        kappa0: Some(0.03),
        kappa_rate: 0.04,
    }])
}

fn fine_integration_convergence() -> Outcome {
    let g = geom();
    let sim = simulate(&jerk_manoeuvre(), &g, 10_000).unwrap();
    let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
    let oracle = fine_step_oracle(&sim.log, &g, &frames, DEFAULT_WINDOW_US, 10);
    let run = |slice_us: f64| {
        let config = EstimatorConfig {
            integration: IntegrationConfig {
                slice_us,
                ..IntegrationConfig::default()
            },
            calibration: None,
            ..EstimatorConfig::default()
        };
        *estimate(&sim.log, &g, &frames, &config).unwrap().trajectory.last().unwrap()
    };
    let poses: Vec<PlanarPose<f64>> = [1000.0, 500.0, 250.0].into_iter().map(run).collect();
    let gaps: Vec<f64> = poses.iter().map(|p| (p.position - oracle.position).norm()).collect();
    let steps = [
        (poses[0].position - poses[1].position).norm(),
        (poses[1].position - poses[2].position).norm(),
    ];
    let travelled = sim.truth.length();
    let pass = gaps[1] <= 1e-4 * travelled / 10.0 && gaps[0] > gaps[1] && gaps[1] > gaps[2] && steps[0] > steps[1];
    outcome(
        pass,
        format!(
            "{travelled:.2} m; gap to 10 us oracle {:.2e} / {:.2e} / {:.2e} m at 1 / 0.5 / 0.25 ms, successive changes {:.2e} > {:.2e}",
            gaps[0], gaps[1], gaps[2], steps[0], steps[1]
        ),
    )
}

fn model_ordering() -> Outcome {
    let g = geom();
    let sim = simulate(&figure_of_eight(42), &g, 10_000).unwrap();
    let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
    let score = |model: Model| {
        let est = estimate(&sim.log, &g, &frames, &EstimatorConfig::for_model(model)).unwrap();
        evaluate(&align(&est.trajectory, &sim.truth), &sim.truth, Denominator::ReferenceLength)
            .unwrap()
            .e_loc_prime
    };
    let proposed = score(Model::Proposed);
    let one_track = score(Model::OneTrack);
    let yaw_rate = score(Model::YawRate);
    outcome(
        one_track > yaw_rate && proposed <= yaw_rate,
        format!("e_loc' one_track {one_track:.3e} > yaw_rate {yaw_rate:.3e} >= proposed {proposed:.3e}"),
    )
}

fn suspension_accuracy() -> Outcome {
    let g = geom();
    let loads = load_sweep();
    let results: Vec<_> = loads.iter().map(|l| simulate_load(l, &g).unwrap()).collect();
    let reference = fit_plane(&results[0].frame, &g).unwrap();
    let mounts = [
        Vector3::new(1.35, 0.0, 1.45),
        Vector3::new(3.6, 0.4, 0.6),
        Vector3::new(-0.9, -0.5, 0.9),
    ];
    let slope_x = |plane: &vehodo::suspension::SuspensionPlane<f64>| plane.coefficients[0].atan();
    let mut worst_dz = 0.0f64;
    let mut worst_pitch = 0.0f64;
    for r in &results {
        let live = fit_plane(&r.frame, &g).unwrap();
        let truth_pitch = slope_x(&reference) - slope_x(&live);
        for m in mounts {
            let ext = SensorExtrinsics::new(rotation_z(0.1), m).unwrap();
            let pose = compensated_sensor_pose(&ext, &live, &reference);
            let (dz, pitch) = height_and_pitch(&ext, &pose);
            worst_dz = worst_dz.max((dz + r.deflection_at(m.x, m.y)).abs());
            worst_pitch = worst_pitch.max((pitch - truth_pitch).abs().to_degrees());
        }
    }
    outcome(
        worst_dz < 2e-3 && worst_pitch < 0.1,
        format!(
            "{} loads x {} mounts; worst height error {:.3} mm, pitch error {:.2e} deg",
            results.len(),
            mounts.len(),
            worst_dz * 1e3,
            worst_pitch
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let points: Vec<Vector2<f64>> = (0..n)
            .map(|_| Vector2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            .collect();
        let p = Vector2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
        worst = worst.max((point_to_polyline(&p, &points) - brute_point_to_polyline(&p, &points)).abs());
    }

    let wiggly: Vec<PlanarPose<f64>> = (0..200)
        .map(|i| {
            let s = i as f64 * 0.37;
            PlanarPose::new(s, (s * 0.3).sin() * 4.0, 0.0, i * 10_000)
        })
        .collect();
    let wiggly = Trajectory::new(wiggly).unwrap();
    let identical = e_loc(&wiggly, &wiggly, Denominator::ReferenceLength).unwrap();

    let reference = Trajectory::new(
        (0..=2)
            .map(|i| PlanarPose::new(i as f64 * 50.0, 0.0, 0.0, i * 1_000_000))
            .collect(),
    )
    .unwrap();
    let offset = Trajectory::new(
        (0..50)
            .map(|i| PlanarPose::new(i as f64 * 2.0, 0.5, 0.0, i * 10_000))
            .collect(),
    )
    .unwrap();
    let parallel = e_loc(&offset, &reference, Denominator::ReferenceLength).unwrap();
    outcome(
        worst <= 1e-6 && identical == 0.0 && (parallel - 0.25).abs() <= 1e-9,
        format!("worst polyline deviation {worst:.1e}; identical e_loc {identical}; parallel case {parallel}"),
    )
}

fn quadratic(c: [f64; 3], t_ref: Micros) -> QuadraticModel<f64> {
    QuadraticModel {
        c1: c[0],
        c2: c[1],
        c3: c[2],
        t_ref,
        t_frame: t_ref,
    }
}

/// The time-reverse of `m` over `[0, span]`, negated: `-m(span - τ)`.
fn reversed(m: &QuadraticModel<f64>, span: f64) -> QuadraticModel<f64> {
    let v = |tau: f64| -m.eval_offset(span - tau);
    // Interpolate three points of the reversed quadratic.
    let (a, b, c) = (v(0.0), v(span / 2.0), v(span));
    let h = span / 2.0;
    let c3 = (a - 2.0 * b + c) / (2.0 * h * h);
    let c2 = (b - a) / h - c3 * h;
    quadratic([a, c2, c3], 0)
}

fn random_signals(rng: &mut ChaCha8Rng) -> FrameSignals<f64> {
    let base: f64 = rng.random_range(2.0..15.0);
    let yaw = [rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3), rng.random_range(-0.5..0.5)];
    FrameSignals {
        yaw_rate: quadratic(yaw, 0),
        wheel_speeds: std::array::from_fn(|_| {
            quadratic(
                [base + rng.random_range(-0.3..0.3), rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)],
                0,
            )
        }),
    }
}

fn invariants() -> Outcome {
    let g = geom();
    let cfg = IntegrationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut pass = true;

    // Rigid equivariance of accumulated frame motions.
    let mut worst_equiv = 0.0f64;
    for _ in 0..100 {
        let deltas: Vec<MotionDelta<f64>> = (0..30)
            .map(|_| integrate_frame(&random_signals(&mut rng), 0, 33_000, &g, &cfg).unwrap().delta)
            .collect();
        let start = PlanarPose::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(-PI..PI),
            0,
        );
        let (mut a, mut b) = (PlanarPose::origin(0), start);
        for (k, d) in deltas.iter().enumerate() {
            let t = (k as Micros + 1) * 33_000;
            a = accumulate(&a, d, t);
            b = accumulate(&b, d, t);
            let mapped = start.rotation() * a.position + start.position;
            worst_equiv = worst_equiv
                .max((mapped - b.position).norm())
                .max(wrap(a.heading + start.heading - b.heading).abs());
        }
    }
    pass &= worst_equiv <= 1e-9;
    notes.push(format!("equivariance {worst_equiv:.1e}"));

    // Drive a frame, then its exact time reverse.
    let mut worst_rev_pos = 0.0f64;
    let mut worst_rev_heading = 0.0f64;
    for _ in 0..200 {
        let fwd = random_signals(&mut rng);
        let span_us = 33_000;
        let span = span_us as f64 * 1e-6;
        let back = FrameSignals {
            yaw_rate: reversed(&fwd.yaw_rate, span),
            wheel_speeds: fwd.wheel_speeds.each_ref().map(|m| reversed(m, span)),
        };
        let p1 = accumulate(
            &PlanarPose::origin(0),
            &integrate_frame(&fwd, 0, span_us, &g, &cfg).unwrap().delta,
            span_us,
        );
        let p2 = accumulate(&p1, &integrate_frame(&back, 0, span_us, &g, &cfg).unwrap().delta, 2 * span_us);
        worst_rev_pos = worst_rev_pos.max(p2.position.norm());
        worst_rev_heading = worst_rev_heading.max(wrap(p2.heading).abs());
    }
    pass &= worst_rev_pos <= 1e-6 && worst_rev_heading <= 1e-8;
    notes.push(format!("reversibility {worst_rev_pos:.1e} m {worst_rev_heading:.1e} rad"));

    // Plane alignment and rotation orthonormality.
    let mut worst_align = 0.0f64;
    let mut all_rotations = true;
    let reference = fit_plane(&SuspensionFrame::new([0.36, 0.36, 0.35, 0.35], 0).unwrap(), &g).unwrap();
    let ext = SensorExtrinsics::new(
        rotation_between(&Vector3::new(0.1, -0.2, 1.0).normalize(), &Vector3::z()),
        Vector3::new(1.2, 0.1, 1.5),
    )
    .unwrap();
    for _ in 0..1000 {
        let heights: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.2..0.5));
        let points = SuspensionFrame::new(heights, 0).unwrap().points(&g);
        let live = fit_plane_points(&points).unwrap();
        let r = rotation_between(&live.normal, &reference.normal);
        worst_align = worst_align.max((r * live.normal - reference.normal).amax());
        let vehicle = compensated_sensor_pose(&ext, &live, &reference);
        let heading = rng.random_range(-PI..PI);
        let world = sensor_pose_world(&PlanarPose::new(1.0, 2.0, heading, 0), &vehicle);
        for m in [r, vehicle.rotation, world.rotation] {
            all_rotations &= is_rotation::<f64>(&m, 1e-10);
        }
    }
    pass &= worst_align <= 1e-10 && all_rotations;
    notes.push(format!("R_s n = n_r {worst_align:.1e}, rotations orthonormal: {all_rotations}"));

    // Byte-identical reruns.
    let g = geom();
    let run = || {
        let sim = simulate(&figure_of_eight(42), &g, 10_000).unwrap();
        let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
        let est = estimate(&sim.log, &g, &frames, &EstimatorConfig::default()).unwrap();
        (sim.log.to_csv_string(), trajectory_to_csv(&sim.truth), trajectory_to_csv(&est.trajectory))
    };
    let deterministic = run() == run();
    pass &= deterministic;
    notes.push(format!("deterministic reruns: {deterministic}"));

    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 7] = [
        ("quadratic-fit exactness", quadratic_exactness),
        ("circle round trip", circle_round_trip),
        ("fine-integration convergence", fine_integration_convergence),
        ("figure-of-8 model ordering", model_ordering),
        ("suspension sweep accuracy", suspension_accuracy),
        ("metric oracle equivalence", metric_oracles),
        ("invariant suites", invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<30} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
