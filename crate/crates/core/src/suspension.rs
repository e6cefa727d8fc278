//! Body attitude from the four suspension heights.
//!
//! Each corner gives a point `(x_i, y_i, h_i)` in the vehicle frame; the
//! least-squares plane through them is compared with a plane captured while
//! the vehicle was settled, giving the body rotation and translation that are
//! then composed with a sensor's extrinsic calibration.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::linalg::solve3;
use crate::planar::{PlanarPose, VehicleGeometry};
use crate::signal::{Micros, Wheel};
use crate::Scalar;

/// Heights outside `(0, MAX_HEIGHT)` metres are rejected.
pub const MAX_HEIGHT: f64 = 2.0;

/// Below this |n̂ × n̂_r| the planes count as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuspensionError {
    #[error("{wheel:?} height {height} m is outside (0, {MAX_HEIGHT}) m")]
    ImplausibleHeight { wheel: Wheel, height: f64 },
    #[error("wheel positions are collinear")]
    DegenerateGeometry,
    #[error("rotation matrix is not orthonormal")]
    NotARotation,
}

/// Corner heights in [`Wheel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionFrame<T> {
    pub heights: [T; 4],
    pub t: Micros,
}

impl<T: Scalar> SuspensionFrame<T> {
    pub fn new(heights: [T; 4], t: Micros) -> Result<Self, SuspensionError> {
        for (wheel, &h) in Wheel::ALL.iter().zip(&heights) {
            if !(h > T::zero() && h < T::lit(MAX_HEIGHT)) {
                return Err(SuspensionError::ImplausibleHeight {
                    wheel: *wheel,
                    height: h.to_f64_lossy(),
                });
            }
        }
        Ok(Self { heights, t })
    }

    pub fn points(&self, geom: &VehicleGeometry<T>) -> [Vector3<T>; 4] {
        let wheels = geom.wheel_positions();
        std::array::from_fn(|i| Vector3::new(wheels[i].x, wheels[i].y, self.heights[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionPlane<T> {
    /// Unit normal with positive Z.
    pub normal: Vector3<T>,
    /// Mean of the four suspension points.
    pub centroid: Vector3<T>,
    /// RMS point-to-plane distance.
    pub residual: T,
    /// `(a, b, c)` of `z = a x + b y + c`.
    pub coefficients: [T; 3],
}

impl<T: Scalar> SuspensionPlane<T> {
    /// Nose-down rotation about vehicle Y implied by the plane.
    pub fn pitch(&self) -> T {
        self.normal.x.atan2(self.normal.z)
    }

    /// Left-side-up rotation about vehicle X implied by the plane.
    pub fn roll(&self) -> T {
        (-self.normal.y).atan2(self.normal.z)
    }
}

pub(crate) fn norm3<T: Scalar>(v: &Vector3<T>) -> T {
    v.dot(v).sqrt()
}

/// Least-squares plane `z = a x + b y + c` through the frame's four points.
pub fn fit_plane<T: Scalar>(
    frame: &SuspensionFrame<T>,
    geom: &VehicleGeometry<T>,
) -> Result<SuspensionPlane<T>, SuspensionError> {
    fit_plane_points(&frame.points(geom))
}

pub fn fit_plane_points<T: Scalar>(points: &[Vector3<T>]) -> Result<SuspensionPlane<T>, SuspensionError> {
    let n = T::from_usize(points.len()).expect("point count fits");
    if points.len() < 3 {
        return Err(SuspensionError::DegenerateGeometry);
    }
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    // Centred coordinates decouple c from (a, b).
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    let mut sxz = T::zero();
    let mut syz = T::zero();
    for p in points {
        let d = p - centroid;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        sxz += d.x * d.z;
        syz += d.y * d.z;
    }
    let normal_matrix = [[sxx, sxy, T::zero()], [sxy, syy, T::zero()], [T::zero(), T::zero(), n]];
    let scale = sxx * syy;
    let Some(([a, b, _], det)) = solve3(&normal_matrix, &[sxz, syz, T::zero()]) else {
        return Err(SuspensionError::DegenerateGeometry);
    };
    if det.abs() <= scale * n * T::lit(1e-12) {
        return Err(SuspensionError::DegenerateGeometry);
    }
    let c = centroid.z - a * centroid.x - b * centroid.y;
    let raw = Vector3::new(-a, -b, T::one());
    let normal = raw / norm3(&raw);

    let sum_sq = points.iter().fold(T::zero(), |acc, p| {
        let dist = (p - centroid).dot(&normal);
        acc + dist * dist
    });
    Ok(SuspensionPlane {
        normal,
        centroid,
        residual: (sum_sq / n).sqrt(),
        coefficients: [a, b, c],
    })
}

/// Body rotation and translation relative to the settled reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyMotion<T> {
    /// Maps the live normal onto the reference normal.
    pub rotation: Matrix3<T>,
    /// `s̄_ref - s̄_live`.
    pub translation: Vector3<T>,
}

impl<T: Scalar> BodyMotion<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// Rotation by `angle` about the unit vector `axis`.
pub fn axis_angle<T: Scalar>(axis: &Vector3<T>, angle: T) -> Matrix3<T> {
    let k = Matrix3::new(
        T::zero(),
        -axis.z,
        axis.y,
        axis.z,
        T::zero(),
        -axis.x,
        -axis.y,
        axis.x,
        T::zero(),
    );
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (T::one() - c)
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between<T: Scalar>(from: &Vector3<T>, to: &Vector3<T>) -> Matrix3<T> {
    let axis = from.cross(to);
    let s = norm3(&axis);
    if s < T::lit(PARALLEL_TOLERANCE) {
        return Matrix3::identity();
    }
    axis_angle(&(axis / s), s.atan2(from.dot(to)))
}

pub fn body_motion<T: Scalar>(live: &SuspensionPlane<T>, reference: &SuspensionPlane<T>) -> BodyMotion<T> {
    BodyMotion {
        rotation: rotation_between(&live.normal, &reference.normal),
        translation: reference.centroid - live.centroid,
    }
}

/// Sensor calibration in the settled state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorExtrinsics<T> {
    /// Maps vehicle-frame vectors into the sensor frame.
    pub rotation: Matrix3<T>,
    /// Sensor position in the vehicle frame, m.
    pub position: Vector3<T>,
}

impl<T: Scalar> SensorExtrinsics<T> {
    pub fn new(rotation: Matrix3<T>, position: Vector3<T>) -> Result<Self, SuspensionError> {
        if !is_rotation(&rotation, T::lit(1e-6)) {
            return Err(SuspensionError::NotARotation);
        }
        Ok(Self { rotation, position })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose<T> {
    pub rotation: Matrix3<T>,
    pub position: Vector3<T>,
}

/// `R_p = R_e R_s`, `c_p = R_s (c_e + t_s)`.
pub fn sensor_pose_vehicle<T: Scalar>(ext: &SensorExtrinsics<T>, motion: &BodyMotion<T>) -> SensorPose<T> {
    SensorPose {
        rotation: ext.rotation * motion.rotation,
        position: motion.rotation * (ext.position + motion.translation),
    }
}

/// Sensor pose with the body rotated about the reference centroid and then
/// moved onto the live centroid, so that a sensor placed at a suspension
/// point stays on it. Orientation is the same as [`sensor_pose_vehicle`].
pub fn compensated_sensor_pose<T: Scalar>(
    ext: &SensorExtrinsics<T>,
    live: &SuspensionPlane<T>,
    reference: &SuspensionPlane<T>,
) -> SensorPose<T> {
    let motion = body_motion(live, reference);
    SensorPose {
        rotation: ext.rotation * motion.rotation,
        position: motion.rotation.transpose() * (ext.position - reference.centroid) + live.centroid,
    }
}

/// Rotation about Z by `angle`.
pub fn rotation_z<T: Scalar>(angle: T) -> Matrix3<T> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, T::zero(), s, c, T::zero(), T::zero(), T::zero(), T::one())
}

/// World-frame sensor pose: `R_w = R_p R_z(θ)ᵀ`, `c_w = R_z(θ) c_p + p`.
pub fn sensor_pose_world<T: Scalar>(vehicle: &PlanarPose<T>, sensor: &SensorPose<T>) -> SensorPose<T> {
    let rz = rotation_z(vehicle.heading);
    let p = Vector3::new(vehicle.position.x, vehicle.position.y, T::zero());
    SensorPose {
        rotation: sensor.rotation * rz.transpose(),
        position: rz * sensor.position + p,
    }
}

/// Inverse of [`sensor_pose_world`].
pub fn sensor_pose_from_world<T: Scalar>(vehicle: &PlanarPose<T>, world: &SensorPose<T>) -> SensorPose<T> {
    let rz = rotation_z(vehicle.heading);
    let p = Vector3::new(vehicle.position.x, vehicle.position.y, T::zero());
    SensorPose {
        rotation: world.rotation * rz,
        position: rz.transpose() * (world.position - p),
    }
}

pub fn is_rotation<T: Scalar>(m: &Matrix3<T>, tol: T) -> bool {
    let e = m.transpose() * m - Matrix3::identity();
    let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
    e.iter().all(|v| v.abs() <= tol) && (det - T::one()).abs() <= tol
}
