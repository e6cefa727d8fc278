//! Static load on a rigid body resting on four linear corner springs.
//!
//! The body stays planar, so the corner deflections are `δ_i = α + β x_i + γ y_i`.
//! Force and moment balance about X and Y give three linear equations for
//! `(α, β, γ)`; each corner then sinks by `δ_i` from its unloaded height.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{invalid, SimError};
use crate::linalg::solve3;
use crate::planar::VehicleGeometry;
use crate::suspension::SuspensionFrame;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    /// kg.
    pub mass: f64,
    /// Load position in the vehicle frame, m.
    pub position: [f64; 2],
    /// Corner spring rates in [`crate::Wheel::ALL`] order, N/m.
    pub stiffness: [f64; 4],
    /// Corner heights without the load, m.
    pub unloaded_heights: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadResult {
    pub frame: SuspensionFrame<f64>,
    /// Load position after clamping to the wheel rectangle.
    pub position: Vector2<f64>,
    /// Extra corner forces, N; they sum to `m g`.
    pub forces: [f64; 4],
    /// `(α, β, γ)` of the deflection field.
    pub deflection: [f64; 3],
    pub clamped: bool,
}

impl LoadResult {
    /// Downward deflection of the body at `(x, y)`.
    pub fn deflection_at(&self, x: f64, y: f64) -> f64 {
        let [a, b, c] = self.deflection;
        a + b * x + c * y
    }
}

pub fn simulate_load(load: &LoadSpec, geom: &VehicleGeometry<f64>) -> Result<LoadResult, SimError> {
    if !(load.mass.is_finite() && load.mass >= 0.0) {
        return Err(invalid("load mass must be >= 0"));
    }
    if load.stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return Err(invalid("spring stiffness must be > 0"));
    }
    if load.position.iter().any(|p| !p.is_finite()) {
        return Err(invalid("load position must be finite"));
    }
    let half = geom.track_width / 2.0;
    let x = load.position[0].clamp(0.0, geom.wheelbase);
    let y = load.position[1].clamp(-half, half);
    let clamped = x != load.position[0] || y != load.position[1];
    if clamped {
        log::warn!(
            "load at ({}, {}) outside the wheel rectangle, clamped to ({x}, {y})",
            load.position[0],
            load.position[1]
        );
    }

    let wheels = geom.wheel_positions();
    let mut m = [[0.0; 3]; 3];
    for (w, k) in wheels.iter().zip(load.stiffness) {
        let basis = [1.0, w.x, w.y];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += k * basis[r] * basis[c];
            }
        }
    }
    let weight = load.mass * GRAVITY;
    let (deflection, _) = solve3(&m, &[weight, weight * x, weight * y])
        .ok_or_else(|| invalid("spring layout cannot carry a load"))?;
    let result_frame = |delta: [f64; 4]| {
        let heights: [f64; 4] = std::array::from_fn(|i| load.unloaded_heights[i] - delta[i]);
        SuspensionFrame::new(heights, 0).map_err(|e| invalid(e.to_string()))
    };
    let [a, b, c] = deflection;
    let delta: [f64; 4] = std::array::from_fn(|i| a + b * wheels[i].x + c * wheels[i].y);
    let forces: [f64; 4] = std::array::from_fn(|i| load.stiffness[i] * delta[i]);
    Ok(LoadResult {
        frame: result_frame(delta)?,
        position: Vector2::new(x, y),
        forces,
        deflection,
        clamped,
    })
}
