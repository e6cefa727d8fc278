mod common;

use proptest::prelude::*;

use vehodo::baselines::{integrate_yaw_samples, two_track_from_distances};
use vehodo::estimate::{estimate, frame_times, EstimatorConfig, Model, DEFAULT_FRAME_PERIOD_US, DEFAULT_WINDOW_US};
use vehodo::io::{parse_trajectory_csv, trajectory_to_csv};
use vehodo::metrics::{evaluate, Denominator};
use vehodo::simulator::scenarios::circle;
use vehodo::simulator::simulate;
use vehodo::{Geometry, SignalLog};

#[test]
fn signal_csv_round_trip_is_byte_identical() {
    let g = Geometry::passenger_car();
    let sim = simulate(&vehodo::simulator::scenarios::figure_of_eight(3), &g, 10_000).unwrap();
    let text = sim.log.to_csv_string();
    let back = SignalLog::parse_str(&text).unwrap();
    assert_eq!(back.to_csv_string(), text);
    let truth = parse_trajectory_csv(&trajectory_to_csv(&sim.truth)).unwrap();
    assert_eq!(truth, sim.truth);
}

#[test]
fn every_model_follows_a_noiseless_circle() {
    let g = Geometry::passenger_car();
    let sim = simulate(&circle(20.0, 4.0, 1.0), &g, 10_000).unwrap();
    let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
    for model in Model::ALL {
        let est = estimate(&sim.log, &g, &frames, &EstimatorConfig::for_model(model)).unwrap();
        // Ticks quantize distance, so the two-track model is the loosest.
        let r = evaluate(&common::align(&est.trajectory, &sim.truth), &sim.truth, Denominator::ReferenceLength).unwrap();
        let bound = if model == Model::TwoTrack { 5e-3 } else { 1e-6 };
        assert!(r.e_loc_prime < bound, "{model}: {r:?}");
    }
}

#[test]
fn reverse_driving_is_tracked() {
    let g = Geometry::passenger_car();
    let sim = simulate(&circle(15.0, -3.0, 0.5), &g, 10_000).unwrap();
    let frames = frame_times(&sim.log, DEFAULT_WINDOW_US, DEFAULT_FRAME_PERIOD_US);
    let est = estimate(&sim.log, &g, &frames, &EstimatorConfig::default()).unwrap();
    let est = common::align(&est.trajectory, &sim.truth);
    let last = est.last().unwrap();
    let truth = sim.truth.interpolate(last.t).unwrap();
    assert!((last.position - truth.position).norm() < 1e-3, "{last:?} vs {truth:?}");
}

proptest! {
    #[test]
    fn two_track_heading_from_difference(dl in -2.0..2.0f64, dr in -2.0..2.0f64, w in 1.0..2.5f64) {
        let d = two_track_from_distances(dl, dr, w);
        prop_assert!((d.dtheta - (dr - dl) / w).abs() < 1e-15);
        // Path length along the arc equals the mean wheel distance.
        let chord = d.dp.norm();
        let arc = if d.dtheta.abs() > 1e-9 { chord * (d.dtheta / 2.0) / (d.dtheta / 2.0).sin() } else { chord };
        prop_assert!((arc - ((dl + dr) / 2.0).abs()).abs() < 1e-9);
    }

    #[test]
    fn constant_yaw_integrates_linearly(rate in -1.0..1.0f64, t1 in 0i64..100_000, len in 1i64..100_000) {
        let samples: Vec<(i64, f64)> = (0..30).map(|k| (k * 10_000, rate)).collect();
        let theta: f64 = integrate_yaw_samples(&samples, t1, t1 + len).unwrap();
        prop_assert!((theta - rate * len as f64 * 1e-6).abs() < 1e-12);
    }
}
