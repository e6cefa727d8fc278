//! Planar odometry from yaw rate and four wheel speeds.
//!
//! Vehicle frame: origin at the rear-axle midpoint, X forward, Y to the left.
//! Heading is measured about world Z, positive for left turns. Wheel distances
//! are signed by direction of travel, so a reversing vehicle has negative `d_i`.
//!
//! Per time step the heading change comes from the yaw rate, the distance of
//! each wheel to the instantaneous centre of rotation comes from
//! `r_i = d_i / Δθ`, and the datum then moves along the chord of its circle.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::solve2;
use crate::quadfit::QuadraticModel;
use crate::signal::{Micros, Wheel};
use crate::{wrap_angle, Scalar};

/// Below this heading change per step the motion is treated as straight.
pub const STRAIGHT_THRESHOLD: f64 = 1e-7;

/// Default integration slice in microseconds.
pub const DEFAULT_SLICE_US: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanarError {
    #[error("invalid interval: t2 ({t2}us) must be after t1 ({t1}us)")]
    InvalidInterval { t1: Micros, t2: Micros },
    #[error("heading change below the straight-line threshold")]
    StraightLine,
    #[error("wheel radii do not determine a unique turning centre")]
    NoUniqueCenter,
    #[error("invalid vehicle geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry<T> {
    /// Rear to front axle distance `l`, m.
    pub wheelbase: T,
    /// Left to right wheel distance `w`, m.
    pub track_width: T,
    pub wheel_circumference: T,
    pub ticks_per_rev: u32,
    #[serde(default)]
    pub rear_steering: bool,
}

impl<T: Scalar> VehicleGeometry<T> {
    pub fn new(
        wheelbase: T,
        track_width: T,
        wheel_circumference: T,
        ticks_per_rev: u32,
    ) -> Result<Self, PlanarError> {
        let g = Self {
            wheelbase,
            track_width,
            wheel_circumference,
            ticks_per_rev,
            rear_steering: false,
        };
        g.validate()?;
        Ok(g)
    }

    /// Mid-size passenger car: l = 2.7 m, w = 1.54 m, 1.98 m tyres, 96 ticks.
    pub fn passenger_car() -> Self {
        Self {
            wheelbase: T::lit(2.7),
            track_width: T::lit(1.54),
            wheel_circumference: T::lit(1.98),
            ticks_per_rev: 96,
            rear_steering: false,
        }
    }

    pub fn with_rear_steering(mut self, enabled: bool) -> Self {
        self.rear_steering = enabled;
        self
    }

    pub fn validate(&self) -> Result<(), PlanarError> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.wheelbase) {
            return Err(PlanarError::InvalidGeometry("wheelbase must be > 0".into()));
        }
        if !positive(self.track_width) {
            return Err(PlanarError::InvalidGeometry("track width must be > 0".into()));
        }
        if !positive(self.wheel_circumference) {
            return Err(PlanarError::InvalidGeometry(
                "wheel circumference must be > 0".into(),
            ));
        }
        if self.ticks_per_rev == 0 {
            return Err(PlanarError::InvalidGeometry("ticks per revolution must be > 0".into()));
        }
        Ok(())
    }

    pub fn wheel_position(&self, wheel: Wheel) -> Vector2<T> {
        let half = self.track_width * T::lit(0.5);
        let x = if wheel.is_front() { self.wheelbase } else { T::zero() };
        let y = if wheel.is_left() { half } else { -half };
        Vector2::new(x, y)
    }

    /// Positions in [`Wheel::ALL`] order.
    pub fn wheel_positions(&self) -> [Vector2<T>; 4] {
        Wheel::ALL.map(|w| self.wheel_position(w))
    }

    pub fn distance_per_tick(&self) -> T {
        self.wheel_circumference / T::from_u32(self.ticks_per_rev).expect("u32 fits")
    }

    pub fn cast<U: Scalar>(&self) -> VehicleGeometry<U> {
        VehicleGeometry {
            wheelbase: U::lit(self.wheelbase.to_f64_lossy()),
            track_width: U::lit(self.track_width.to_f64_lossy()),
            wheel_circumference: U::lit(self.wheel_circumference.to_f64_lossy()),
            ticks_per_rev: self.ticks_per_rev,
            rear_steering: self.rear_steering,
        }
    }
}

/// Vehicle datum pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose<T> {
    pub position: Vector2<T>,
    /// Heading about world Z in (-π, π].
    pub heading: T,
    pub t: Micros,
}

impl<T: Scalar> PlanarPose<T> {
    pub fn new(x: T, y: T, heading: T, t: Micros) -> Self {
        Self {
            position: Vector2::new(x, y),
            heading: wrap_angle(heading),
            t,
        }
    }

    pub fn origin(t: Micros) -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), t)
    }

    pub fn x(&self) -> T {
        self.position.x
    }

    pub fn y(&self) -> T {
        self.position.y
    }

    /// Vehicle-to-world rotation.
    pub fn rotation(&self) -> Matrix2<T> {
        rotation2(self.heading)
    }

    pub fn is_finite(&self) -> bool {
        self.position.x.is_finite() && self.position.y.is_finite() && self.heading.is_finite()
    }
}

pub(crate) fn rotation2<T: Scalar>(angle: T) -> Matrix2<T> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// How the datum moved during a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Turn<T> {
    Straight,
    /// Signed datum radius for a fixed rear axle; positive turns left.
    Radius(T),
    /// Turning centre in the vehicle frame (adaptive rear steering).
    Center(Vector2<T>),
}

/// Relative motion over one step, expressed in the vehicle frame at its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionDelta<T> {
    pub dtheta: T,
    pub dp: Vector2<T>,
    pub turn: Turn<T>,
}

impl<T: Scalar> MotionDelta<T> {
    pub fn identity() -> Self {
        Self {
            dtheta: T::zero(),
            dp: Vector2::zeros(),
            turn: Turn::Straight,
        }
    }
}

/// Heading integration rule for one yaw-rate sample pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadingRule {
    /// `(θ'₁ + θ'₂)/2 · (t₂ - t₁)`
    #[default]
    Trapezoid,
    /// `(θ'₁ + θ'₂) / (2 (t₂ - t₁))`, kept only to compare against the printed form.
    PrintedQuotient,
}

impl HeadingRule {
    #[inline]
    pub fn apply<T: Scalar>(self, rate1: T, rate2: T, dt: T) -> T {
        match self {
            HeadingRule::Trapezoid => (rate1 + rate2) * T::lit(0.5) * dt,
            HeadingRule::PrintedQuotient => (rate1 + rate2) / (T::lit(2.0) * dt),
        }
    }
}

/// Trapezoidal heading change between two yaw-rate samples.
pub fn heading_delta<T: Scalar>(rate1: T, rate2: T, t1: Micros, t2: Micros) -> Result<T, PlanarError> {
    heading_delta_with(HeadingRule::Trapezoid, rate1, rate2, t1, t2)
}

pub fn heading_delta_with<T: Scalar>(
    rule: HeadingRule,
    rate1: T,
    rate2: T,
    t1: Micros,
    t2: Micros,
) -> Result<T, PlanarError> {
    if t2 <= t1 {
        return Err(PlanarError::InvalidInterval { t1, t2 });
    }
    Ok(rule.apply(rate1, rate2, T::from_micros(t2 - t1)))
}

/// `r_i = d_i / Δθ` for the four wheels.
pub fn wheel_radii<T: Scalar>(distances: [T; 4], dtheta: T) -> Result<[T; 4], PlanarError> {
    if dtheta.abs() < T::lit(STRAIGHT_THRESHOLD) {
        return Err(PlanarError::StraightLine);
    }
    Ok(distances.map(|d| d / dtheta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatumRadius<T> {
    /// Signed distance from the datum to the turning centre; positive = left.
    pub radius: T,
    /// The four single-wheel estimates before averaging (magnitudes).
    pub per_wheel: [T; 4],
    /// A front radius was shorter than the wheelbase and had to be clamped.
    pub low_confidence: bool,
}

/// Datum radius for a fixed rear axle: the centre lies on the rear-axle line,
/// so each wheel gives one estimate of its lateral offset and the four are
/// averaged. Works on magnitudes; the side comes from the sign of the radii.
pub fn datum_radius_fixed<T: Scalar>(radii: [T; 4], geom: &VehicleGeometry<T>) -> DatumRadius<T> {
    let sum = radii.iter().fold(T::zero(), |a, &r| a + r);
    let side = if sum < T::zero() { -T::one() } else { T::one() };
    let half = geom.track_width * T::lit(0.5);
    let l2 = geom.wheelbase * geom.wheelbase;
    let mut low_confidence = false;
    let mut lateral = |r: T| {
        let radicand = r * r - l2;
        if radicand < T::zero() {
            low_confidence = true;
            T::zero()
        } else {
            radicand.sqrt()
        }
    };
    let [rl, rr, fl, fr] = radii.map(|r| r.abs());
    // Wheels on the same side as the centre are inner wheels.
    let inner = half;
    let outer = -half;
    let (left, right) = if side > T::zero() { (inner, outer) } else { (outer, inner) };
    let per_wheel = [rl + left, rr + right, lateral(fl) + left, lateral(fr) + right];
    let mean = per_wheel.iter().fold(T::zero(), |a, &r| a + r) / T::lit(4.0);
    DatumRadius {
        radius: side * mean,
        per_wheel,
        low_confidence,
    }
}

/// Least-squares turning centre from four wheel-to-centre distances, for
/// vehicles whose rear wheels also steer. Uses the algebraic circle residual
/// `|w_i - c|² - r_i²`, whose stationary equations are linear once the common
/// `|c|²` term is eliminated by centring on the mean wheel position.
pub fn datum_center_rear_steer<T: Scalar>(
    radii: [T; 4],
    geom: &VehicleGeometry<T>,
) -> Result<Vector2<T>, PlanarError> {
    let wheels = geom.wheel_positions();
    let four = T::lit(4.0);
    let mean_w = wheels.iter().fold(Vector2::zeros(), |a, w| a + w) / four;
    let q: [T; 4] = std::array::from_fn(|i| wheels[i].dot(&wheels[i]) - radii[i] * radii[i]);
    let mean_q = q.iter().fold(T::zero(), |a, &v| a + v) / four;

    let mut m = [[T::zero(); 2]; 2];
    let mut b = [T::zero(); 2];
    for i in 0..4 {
        let a = (wheels[i] - mean_w) * T::lit(2.0);
        let rhs = q[i] - mean_q;
        m[0][0] += a.x * a.x;
        m[0][1] += a.x * a.y;
        m[1][0] += a.y * a.x;
        m[1][1] += a.y * a.y;
        b[0] += a.x * rhs;
        b[1] += a.y * rhs;
    }
    let scale = m[0][0] * m[1][1];
    let [cx, cy] = solve2(&m, &b, scale * T::lit(1e-12)).ok_or(PlanarError::NoUniqueCenter)?;
    Ok(Vector2::new(cx, cy))
}

/// Chord displacement of the datum for a signed radius, or `(d_mean, 0)` when
/// the radius is unknown or the turn is below the straight-line threshold.
pub fn motion_vector<T: Scalar>(radius: Option<T>, dtheta: T, d_mean: T) -> Vector2<T> {
    match radius {
        Some(r) if dtheta.abs() >= T::lit(STRAIGHT_THRESHOLD) => {
            let (s, c) = dtheta.sin_cos();
            Vector2::new(r * s, r * (T::one() - c))
        }
        _ => Vector2::new(d_mean, T::zero()),
    }
}

/// Displacement of the datum when the body rotates by `dtheta` about `center`.
pub fn motion_about_center<T: Scalar>(center: Vector2<T>, dtheta: T) -> Vector2<T> {
    center - rotation2(dtheta) * center
}

/// `p₂ = R(θ₁) Δp + p₁`, `θ₂ = θ₁ + Δθ`.
pub fn accumulate<T: Scalar>(pose: &PlanarPose<T>, delta: &MotionDelta<T>, t: Micros) -> PlanarPose<T> {
    PlanarPose {
        position: pose.rotation() * delta.dp + pose.position,
        heading: wrap_angle(pose.heading + delta.dtheta),
        t,
    }
}

/// Motion for one step given its heading change and signed wheel distances.
pub fn step_motion<T: Scalar>(
    dtheta: T,
    distances: [T; 4],
    geom: &VehicleGeometry<T>,
) -> Result<(MotionDelta<T>, bool), PlanarError> {
    let d_mean = distances.iter().fold(T::zero(), |a, &d| a + d) / T::lit(4.0);
    let radii = match wheel_radii(distances, dtheta) {
        Ok(r) => r,
        Err(PlanarError::StraightLine) => {
            return Ok((
                MotionDelta {
                    dtheta,
                    dp: Vector2::new(d_mean, T::zero()),
                    turn: Turn::Straight,
                },
                false,
            ))
        }
        Err(e) => return Err(e),
    };
    if geom.rear_steering {
        let center = datum_center_rear_steer(radii.map(|r| r.abs()), geom)?;
        Ok((
            MotionDelta {
                dtheta,
                dp: motion_about_center(center, dtheta),
                turn: Turn::Center(center),
            },
            false,
        ))
    } else {
        let datum = datum_radius_fixed(radii, geom);
        Ok((
            MotionDelta {
                dtheta,
                dp: motion_vector(Some(datum.radius), dtheta, d_mean),
                turn: Turn::Radius(datum.radius),
            },
            datum.low_confidence,
        ))
    }
}

/// The five fitted signals used to integrate one frame interval.
/// Wheel speeds are signed and in [`Wheel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSignals<T> {
    pub yaw_rate: QuadraticModel<T>,
    pub wheel_speeds: [QuadraticModel<T>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    /// Slice length in microseconds.
    pub slice_us: f64,
    pub heading_rule: HeadingRule,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            slice_us: DEFAULT_SLICE_US,
            heading_rule: HeadingRule::Trapezoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMotion<T> {
    /// Total motion in the vehicle frame at `t_prev`.
    pub delta: MotionDelta<T>,
    pub slices: usize,
    pub low_confidence_slices: usize,
}

/// Integrates the fitted signals over `[t_prev, t_now]` in fine slices:
/// per slice the models are evaluated at both ends, heading and wheel
/// distances use the mean of the two ends, and the chord step is accumulated
/// in the frame of the vehicle at `t_prev`.
pub fn integrate_frame<T: Scalar>(
    signals: &FrameSignals<T>,
    t_prev: Micros,
    t_now: Micros,
    geom: &VehicleGeometry<T>,
    config: &IntegrationConfig,
) -> Result<FrameMotion<T>, PlanarError> {
    if t_now <= t_prev {
        return Err(PlanarError::InvalidInterval {
            t1: t_prev,
            t2: t_now,
        });
    }
    let span_us = (t_now - t_prev) as f64;
    let slices = (span_us / config.slice_us).ceil().max(1.0) as usize;
    let span = T::from_micros(t_now - t_prev);
    let slice = T::lit(config.slice_us * 1e-6);

    let yaw_base = T::from_micros(t_prev - signals.yaw_rate.t_ref);
    let wheel_base = signals.wheel_speeds.map(|m| T::from_micros(t_prev - m.t_ref));
    let eval = |s: T| -> (T, [T; 4]) {
        let yaw = signals.yaw_rate.eval_offset(yaw_base + s);
        let v = std::array::from_fn(|i| signals.wheel_speeds[i].eval_offset(wheel_base[i] + s));
        (yaw, v)
    };

    let half = T::lit(0.5);
    let mut position = Vector2::<T>::zeros();
    let mut heading = T::zero();
    let mut low_confidence = 0;
    let mut s0 = T::zero();
    let (mut yaw0, mut v0) = eval(s0);
    for k in 1..=slices {
        let s1 = if k == slices {
            span
        } else {
            T::from_usize(k).expect("usize fits") * slice
        };
        let (yaw1, v1) = eval(s1);
        let dt = s1 - s0;
        let dtheta = config.heading_rule.apply(yaw0, yaw1, dt);
        let distances: [T; 4] = std::array::from_fn(|i| (v0[i] + v1[i]) * half * dt);
        let (step, flagged) = step_motion(dtheta, distances, geom)?;
        position += rotation2(heading) * step.dp;
        heading += dtheta;
        if flagged {
            low_confidence += 1;
        }
        s0 = s1;
        yaw0 = yaw1;
        v0 = v1;
    }
    Ok(FrameMotion {
        delta: MotionDelta {
            dtheta: heading,
            dp: position,
            turn: Turn::Straight,
        },
        slices,
        low_confidence_slices: low_confidence,
    })
}
