//! Reference odometry models: two-track (wheel ticks), one-track (front wheel
//! angle) and plain yaw-rate integration. They work on raw samples, without
//! the quadratic fit or fine slicing, and share the chord motion of
//! [`crate::planar`].

use nalgebra::Vector2;
use thiserror::Error;

use crate::planar::{motion_vector, MotionDelta, Turn, VehicleGeometry, STRAIGHT_THRESHOLD};
use crate::signal::{Micros, Wheel};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("{wheel:?} ticks changed at t={t}us without a known direction")]
    DirectionUnknown { wheel: Wheel, t: Micros },
    #[error("front wheel angle {phi} rad is not within (-pi/2, pi/2)")]
    SteeringOutOfRange { phi: f64 },
    #[error("invalid interval: t2 ({t2}us) must be after t1 ({t1}us)")]
    InvalidInterval { t1: Micros, t2: Micros },
    #[error("no yaw-rate samples available")]
    NoSamples,
}

/// Tick count change of one wheel over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickDelta {
    pub wheel: Wheel,
    pub ticks: u64,
    /// -1, 0 or +1; `None` when no direction signal is available.
    pub direction: Option<i8>,
    pub t1: Micros,
    pub t2: Micros,
}

impl TickDelta {
    /// Signed distance `ticks · circumference / ticks_per_rev`.
    pub fn distance<T: Scalar>(&self, geom: &VehicleGeometry<T>) -> Result<T, BaselineError> {
        if self.ticks == 0 {
            return Ok(T::zero());
        }
        let sign = match self.direction {
            Some(d) if d > 0 => T::one(),
            Some(d) if d < 0 => -T::one(),
            _ => {
                return Err(BaselineError::DirectionUnknown {
                    wheel: self.wheel,
                    t: self.t2,
                })
            }
        };
        let ticks = T::from_u64(self.ticks).expect("tick count representable");
        Ok(sign * ticks * geom.distance_per_tick())
    }
}

fn chord_delta<T: Scalar>(dtheta: T, distance: T) -> MotionDelta<T> {
    if dtheta.abs() < T::lit(STRAIGHT_THRESHOLD) {
        return MotionDelta {
            dtheta,
            dp: Vector2::new(distance, T::zero()),
            turn: Turn::Straight,
        };
    }
    let r = distance / dtheta;
    MotionDelta {
        dtheta,
        dp: motion_vector(Some(r), dtheta, distance),
        turn: Turn::Radius(r),
    }
}

/// Differential-drive step from signed left/right distances of one axle.
/// The heading change is `(d_r - d_l) / w` and the datum radius
/// `(w/2)(d_l + d_r)/(d_r - d_l)`, positive for left turns.
pub fn two_track_from_distances<T: Scalar>(d_left: T, d_right: T, track_width: T) -> MotionDelta<T> {
    let dtheta = (d_right - d_left) / track_width;
    chord_delta(dtheta, (d_left + d_right) * T::lit(0.5))
}

pub fn two_track_step<T: Scalar>(
    left: &TickDelta,
    right: &TickDelta,
    geom: &VehicleGeometry<T>,
) -> Result<MotionDelta<T>, BaselineError> {
    let d_left = left.distance(geom)?;
    let d_right = right.distance(geom)?;
    Ok(two_track_from_distances(d_left, d_right, geom.track_width))
}

/// Kinematic bicycle step about the rear axle: `r = l / tan φ`, `Δθ = d / r`,
/// with `d` the mean rear speed times `dt` seconds.
pub fn one_track_step<T: Scalar>(
    phi: T,
    rear_speeds: [T; 2],
    dt: T,
    geom: &VehicleGeometry<T>,
) -> Result<MotionDelta<T>, BaselineError> {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    if !phi.is_finite() || phi.abs() >= half_pi {
        return Err(BaselineError::SteeringOutOfRange {
            phi: phi.to_f64_lossy(),
        });
    }
    let distance = (rear_speeds[0] + rear_speeds[1]) * T::lit(0.5) * dt;
    if phi.abs() < T::lit(STRAIGHT_THRESHOLD) {
        return Ok(MotionDelta {
            dtheta: T::zero(),
            dp: Vector2::new(distance, T::zero()),
            turn: Turn::Straight,
        });
    }
    let r = geom.wheelbase / phi.tan();
    let dtheta = distance / r;
    Ok(MotionDelta {
        dtheta,
        dp: motion_vector(Some(r), dtheta, distance),
        turn: Turn::Radius(r),
    })
}

/// Heading change over `[t1, t2]` by the trapezoid rule on raw samples. The
/// signal is held flat from the last sample at or before `t1` and after the
/// last sample inside the interval, so only past samples are used.
pub fn integrate_yaw_samples<T: Scalar>(
    samples: &[(Micros, T)],
    t1: Micros,
    t2: Micros,
) -> Result<T, BaselineError> {
    if t2 <= t1 {
        return Err(BaselineError::InvalidInterval { t1, t2 });
    }
    let start = samples.partition_point(|s| s.0 <= t1);
    let end = samples.partition_point(|s| s.0 <= t2);
    let initial = match start.checked_sub(1) {
        Some(i) => samples[i].1,
        None => samples.get(start).filter(|_| start < end).ok_or(BaselineError::NoSamples)?.1,
    };
    let half = T::lit(0.5);
    let mut theta = T::zero();
    let (mut t_prev, mut v_prev) = (t1, initial);
    for &(t, v) in &samples[start..end] {
        theta += (v_prev + v) * half * T::from_micros(t - t_prev);
        t_prev = t;
        v_prev = v;
    }
    theta += v_prev * T::from_micros(t2 - t_prev);
    Ok(theta)
}

/// Yaw-rate odometry step: trapezoidal heading from the raw yaw samples and
/// distance from the mean rear-wheel speed over the interval.
pub fn yaw_rate_step<T: Scalar>(
    yaw_samples: &[(Micros, T)],
    rear_speed_mean: T,
    t1: Micros,
    t2: Micros,
) -> Result<MotionDelta<T>, BaselineError> {
    let dtheta = integrate_yaw_samples(yaw_samples, t1, t2)?;
    let distance = rear_speed_mean * T::from_micros(t2 - t1);
    Ok(chord_delta(dtheta, distance))
}
