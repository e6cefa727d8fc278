//! Vehicle odometry from asynchronous wheel-speed, yaw-rate and ride-height
//! signals.
//!
//! The estimation core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulator, file formats
//! and CLI use.

mod linalg;
mod scalar;

pub mod baselines;
pub mod estimate;
pub mod io;
pub mod metrics;
pub mod planar;
pub mod quadfit;
pub mod signal;
pub mod simulator;
pub mod suspension;

pub use scalar::{wrap_angle, Scalar};
pub use signal::{Channel, ChannelSample, Micros, Sample, SignalError, SignalLog, Wheel};

pub type Geometry = planar::VehicleGeometry<f64>;
pub type Pose = planar::PlanarPose<f64>;
pub type Pose32 = planar::PlanarPose<f32>;
pub type Quadratic = quadfit::QuadraticModel<f64>;
pub type Quadratic32 = quadfit::QuadraticModel<f32>;
pub type Trajectory = metrics::Trajectory<f64>;
