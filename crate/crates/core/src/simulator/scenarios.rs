//! Canned scenarios and the scenario file format.

use serde::{Deserialize, Serialize};

use super::{LoadSpec, ManoeuvreSpec, NoiseSpec, Segment, SignalRates};
use crate::planar::VehicleGeometry;
use crate::signal::Micros;

pub const DEFAULT_TRUTH_DT_US: Micros = 10_000;

fn default_geometry() -> VehicleGeometry<f64> {
    VehicleGeometry::passenger_car()
}

fn default_truth_dt() -> Micros {
    DEFAULT_TRUTH_DT_US
}

/// Contents of a scenario JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum Scenario {
    Manoeuvre {
        #[serde(default = "default_geometry")]
        geometry: VehicleGeometry<f64>,
        #[serde(default = "default_truth_dt")]
        truth_dt_us: Micros,
        manoeuvre: ManoeuvreSpec,
    },
    LoadSweep {
        #[serde(default = "default_geometry")]
        geometry: VehicleGeometry<f64>,
        loads: Vec<LoadSpec>,
    },
}

impl Scenario {
    pub const CANNED: [&'static str; 2] = ["figure-of-8", "load-sweep"];

    pub fn canned(name: &str, seed: u64) -> Option<Self> {
        let geometry = default_geometry();
        match name {
            "figure-of-8" => Some(Scenario::Manoeuvre {
                geometry,
                truth_dt_us: DEFAULT_TRUTH_DT_US,
                manoeuvre: figure_of_eight(seed),
            }),
            "load-sweep" => Some(Scenario::LoadSweep {
                geometry,
                loads: load_sweep(),
            }),
            _ => None,
        }
    }
}

fn seg(duration: f64, accel: f64, kappa_rate: f64) -> Segment {
    Segment {
        duration,
        v0: None,
        accel,
        jerk: 0.0,
        kappa0: None,
        kappa_rate,
    }
}

/// Two opposite loops joined by curvature ramps, with a standstill at either
/// end. Realistic sensor noise, a 0.5° front wheel angle bias and a small
/// yaw-rate offset.
pub fn figure_of_eight(seed: u64) -> ManoeuvreSpec {
    let kappa = 1.0 / 15.0;
    let segments = vec![
        seg(3.0, 0.0, 0.0),
        seg(4.0, 1.5, 0.0),
        seg(2.0, 0.0, kappa / 2.0),
        seg(13.0, 0.0, 0.0),
        seg(4.0, 0.0, -kappa / 2.0),
        seg(13.0, 0.0, 0.0),
        seg(2.0, 0.0, kappa / 2.0),
        seg(4.0, -1.5, 0.0),
        seg(2.0, 0.0, 0.0),
    ];
    ManoeuvreSpec {
        segments,
        rates: SignalRates::default(),
        noise: NoiseSpec {
            yaw_rate: 0.01,
            wheel_speed: 0.02,
            front_wheel_angle: 0.0017,
            susp_height: 0.0,
        },
        ackermann_error: 0.5f64.to_radians(),
        yaw_bias: 0.004,
        ride_heights: [0.36, 0.36, 0.35, 0.35],
        seed,
    }
}

/// Constant speed and curvature from the first instant, noiseless.
pub fn circle(radius: f64, speed: f64, revolutions: f64) -> ManoeuvreSpec {
    let duration = revolutions * 2.0 * std::f64::consts::PI * radius.abs() / speed.abs();
    ManoeuvreSpec::new(vec![Segment {
        duration,
        v0: Some(speed),
        accel: 0.0,
        jerk: 0.0,
        kappa0: Some(1.0 / radius),
        kappa_rate: 0.0,
    }])
}

pub const SWEEP_STIFFNESS: f64 = 40_000.0;
pub const SWEEP_HEIGHTS: [f64; 4] = [0.36, 0.36, 0.35, 0.35];

/// 50–300 kg in 50 kg steps at x ∈ {0, 0.5, …, 3} m and y ∈ {0, 0.5, 1} m,
/// preceded by the unloaded configuration: 127 loads.
pub fn load_sweep() -> Vec<LoadSpec> {
    let unloaded = LoadSpec {
        mass: 0.0,
        position: [0.0, 0.0],
        stiffness: [SWEEP_STIFFNESS; 4],
        unloaded_heights: SWEEP_HEIGHTS,
    };
    let mut loads = vec![unloaded];
    for mass in (1..=6).map(|i| i as f64 * 50.0) {
        for x in (0..=6).map(|i| i as f64 * 0.5) {
            for y in (0..=2).map(|i| i as f64 * 0.5) {
                loads.push(LoadSpec {
                    mass,
                    position: [x, y],
                    ..unloaded
                });
            }
        }
    }
    loads
}
