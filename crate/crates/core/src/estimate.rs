//! Frame-by-frame trajectory estimation from a signal log.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use thiserror::Error;

use crate::baselines::{self, BaselineError, TickDelta};
use crate::metrics::{MetricsError, Trajectory};
use crate::planar::{
    accumulate, integrate_frame, FrameSignals, IntegrationConfig, PlanarError, PlanarPose, VehicleGeometry,
};
use crate::quadfit::{fit, FitError, QuadraticModel};
use crate::signal::{
    calibrate_yaw_offset, CalibrationConfig, Channel, Micros, SignalError, SignalLog, Wheel, YawOffset,
};
use crate::suspension::{
    compensated_sensor_pose, fit_plane, sensor_pose_world, SensorExtrinsics, SensorPose, SuspensionError,
    SuspensionFrame, SuspensionPlane,
};
use crate::Scalar;

pub const DEFAULT_WINDOW_US: Micros = 200_000;
pub const DEFAULT_FRAME_PERIOD_US: Micros = 33_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Model {
    #[default]
    Proposed,
    TwoTrack,
    OneTrack,
    YawRate,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Proposed, Model::TwoTrack, Model::OneTrack, Model::YawRate];

    pub fn name(self) -> &'static str {
        match self {
            Model::Proposed => "proposed",
            Model::TwoTrack => "two_track",
            Model::OneTrack => "one_track",
            Model::YawRate => "yaw_rate",
        }
    }

    /// Channels that must be present in the log.
    pub fn required_channels(self) -> Vec<Channel> {
        let rear = [Wheel::Rl, Wheel::Rr];
        match self {
            Model::Proposed => std::iter::once(Channel::YawRate)
                .chain(Wheel::ALL.map(Channel::WheelSpeed))
                .collect(),
            Model::TwoTrack => rear.map(Channel::WheelTick).to_vec(),
            Model::OneTrack => std::iter::once(Channel::FrontWheelAngle)
                .chain(rear.map(Channel::WheelSpeed))
                .collect(),
            Model::YawRate => std::iter::once(Channel::YawRate)
                .chain(rear.map(Channel::WheelSpeed))
                .collect(),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected proposed, two_track, one_track or yaw_rate)"))
    }
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("model {model} needs channel `{channel}`, which the log does not contain")]
    MissingChannel { model: Model, channel: Channel },
    #[error("{channel} fit for frame at t={t}us: {source}")]
    Fit {
        channel: Channel,
        t: Micros,
        source: FitError,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Suspension(#[from] SuspensionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("at least two frame timestamps are required")]
    NoFrames,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub model: Model,
    pub window_us: Micros,
    pub integration: IntegrationConfig,
    /// Standstill calibration of the yaw-rate offset; `None` leaves the log as is.
    pub calibration: Option<CalibrationConfig>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            model: Model::Proposed,
            window_us: DEFAULT_WINDOW_US,
            integration: IntegrationConfig::default(),
            calibration: Some(CalibrationConfig::default()),
        }
    }
}

impl EstimatorConfig {
    pub fn for_model(model: Model) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate<T> {
    pub trajectory: Trajectory<T>,
    pub yaw_offset: Option<YawOffset>,
    /// Slices whose front-wheel radius had to be clamped.
    pub low_confidence_slices: usize,
}

/// Frame timestamps every `period_us`, starting one window after the first
/// sample so that every frame has a full window behind it.
pub fn frame_times(log: &SignalLog, window_us: Micros, period_us: Micros) -> Vec<Micros> {
    let Some((first, last)) = log.time_range() else {
        return Vec::new();
    };
    if period_us <= 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut t = first + window_us;
    while t <= last {
        out.push(t);
        t += period_us;
    }
    out
}

/// Runs the configured model over consecutive frame timestamps. The first
/// frame is the origin with zero heading.
pub fn estimate<T: Scalar>(
    log: &SignalLog,
    geom: &VehicleGeometry<T>,
    frames: &[Micros],
    config: &EstimatorConfig,
) -> Result<Estimate<T>, EstimateError> {
    geom.validate()?;
    if config.window_us <= 0 || config.integration.slice_us.is_nan() || config.integration.slice_us <= 0.0 {
        return Err(EstimateError::InvalidConfig(
            "window and slice lengths must be positive".into(),
        ));
    }
    if frames.len() < 2 {
        return Err(EstimateError::NoFrames);
    }
    if let Some(i) = frames.windows(2).position(|w| w[1] <= w[0]) {
        return Err(EstimateError::InvalidConfig(format!(
            "frame timestamps must be strictly increasing (index {})",
            i + 1
        )));
    }
    for channel in config.model.required_channels() {
        if !log.has(channel) {
            return Err(EstimateError::MissingChannel {
                model: config.model,
                channel,
            });
        }
    }

    let mut calibrated;
    let log = match config.calibration {
        Some(cal) if log.has(Channel::YawRate) && log.yaw_offset().is_none() => {
            calibrated = log.clone();
            match calibrate_yaw_offset(log, &cal) {
                Ok(offset) => calibrated.set_yaw_offset(Some(offset)),
                Err(SignalError::NoStandstill { best, required }) => log::warn!(
                    "no standstill with {required} yaw-rate samples (best {best}); yaw offset not removed"
                ),
                Err(e) => return Err(e.into()),
            }
            &calibrated
        }
        _ => log,
    };

    let mut runner = Runner::new(log, geom, config);
    let mut pose = PlanarPose::origin(frames[0]);
    let mut poses = Vec::with_capacity(frames.len());
    poses.push(pose);
    for w in frames.windows(2) {
        let delta = runner.step(w[0], w[1])?;
        pose = accumulate(&pose, &delta, w[1]);
        poses.push(pose);
    }
    Ok(Estimate {
        trajectory: Trajectory::new(poses)?,
        yaw_offset: log.yaw_offset(),
        low_confidence_slices: runner.low_confidence,
    })
}

struct Runner<'a, T> {
    log: &'a SignalLog,
    geom: &'a VehicleGeometry<T>,
    config: &'a EstimatorConfig,
    yaw: Vec<(Micros, T)>,
    low_confidence: usize,
}

impl<'a, T: Scalar> Runner<'a, T> {
    fn new(log: &'a SignalLog, geom: &'a VehicleGeometry<T>, config: &'a EstimatorConfig) -> Self {
        let yaw = if config.model == Model::YawRate {
            log.samples(Channel::YawRate).map(|s| (s.t, T::lit(s.value))).collect()
        } else {
            Vec::new()
        };
        Self {
            log,
            geom,
            config,
            yaw,
            low_confidence: 0,
        }
    }

    fn step(&mut self, t_prev: Micros, t_now: Micros) -> Result<crate::planar::MotionDelta<T>, EstimateError> {
        let dt = T::from_micros(t_now - t_prev);
        match self.config.model {
            Model::Proposed => {
                let signals = frame_signals(self.log, t_now, self.config.window_us)?;
                let motion = integrate_frame(&signals, t_prev, t_now, self.geom, &self.config.integration)?;
                self.low_confidence += motion.low_confidence_slices;
                Ok(motion.delta)
            }
            Model::TwoTrack => {
                let [left, right] = [Wheel::Rl, Wheel::Rr].map(|w| tick_delta(self.log, w, t_prev, t_now));
                Ok(baselines::two_track_step(&left, &right, self.geom)?)
            }
            Model::OneTrack => {
                let phi = interval_mean(self.log, Channel::FrontWheelAngle, t_prev, t_now).unwrap_or(0.0);
                let rear = [Wheel::Rl, Wheel::Rr].map(|w| T::lit(rear_speed(self.log, w, t_prev, t_now)));
                Ok(baselines::one_track_step(T::lit(phi), rear, dt, self.geom)?)
            }
            Model::YawRate => {
                let rear = [Wheel::Rl, Wheel::Rr].map(|w| rear_speed(self.log, w, t_prev, t_now));
                let mean = T::lit((rear[0] + rear[1]) / 2.0);
                Ok(baselines::yaw_rate_step(&self.yaw, mean, t_prev, t_now)?)
            }
        }
    }
}

/// Direction of travel for `wheel` at `t`: -1 when the held direction sample
/// says reversing, otherwise +1.
fn direction_sign(log: &SignalLog, wheel: Wheel, t: Micros) -> f64 {
    match log.held(Channel::WheelDir(wheel), t) {
        Some(s) if s.value < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// Quadratic models of yaw rate and the four signed wheel speeds over the
/// window ending at `t_frame`, all sharing `t_ref = t_frame - window`.
pub fn frame_signals<T: Scalar>(
    log: &SignalLog,
    t_frame: Micros,
    window_us: Micros,
) -> Result<FrameSignals<T>, EstimateError> {
    let fit_channel = |channel: Channel, signed: Option<Wheel>| -> Result<QuadraticModel<T>, EstimateError> {
        let mut window = log.window(channel, t_frame, window_us)?;
        if let Some(wheel) = signed {
            for s in &mut window.samples {
                s.value *= direction_sign(log, wheel, s.t);
            }
        }
        fit(&window).map_err(|source| EstimateError::Fit {
            channel,
            t: t_frame,
            source,
        })
    };
    let yaw_rate = fit_channel(Channel::YawRate, None)?;
    let mut speeds = Vec::with_capacity(4);
    for wheel in Wheel::ALL {
        speeds.push(fit_channel(Channel::WheelSpeed(wheel), Some(wheel))?);
    }
    Ok(FrameSignals {
        yaw_rate,
        wheel_speeds: [speeds[0], speeds[1], speeds[2], speeds[3]],
    })
}

fn tick_delta(log: &SignalLog, wheel: Wheel, t_prev: Micros, t_now: Micros) -> TickDelta {
    let channel = Channel::WheelTick(wheel);
    let at = |t| log.held(channel, t).map_or(0.0, |s| s.value);
    let ticks = (at(t_now) - at(t_prev)).max(0.0) as u64;
    let direction = log
        .held(Channel::WheelDir(wheel), t_now)
        .map(|s| s.value as i8);
    TickDelta {
        wheel,
        ticks,
        direction,
        t1: t_prev,
        t2: t_now,
    }
}

/// Mean of the samples in `(t_prev, t_now]`, or the held value if there are none.
fn interval_mean(log: &SignalLog, channel: Channel, t_prev: Micros, t_now: Micros) -> Option<f64> {
    let samples = log.range(channel, t_prev + 1, t_now);
    if samples.is_empty() {
        return log.held(channel, t_now).map(|s| s.value);
    }
    Some(samples.iter().map(|s| s.value).sum::<f64>() / samples.len() as f64)
}

fn rear_speed(log: &SignalLog, wheel: Wheel, t_prev: Micros, t_now: Micros) -> f64 {
    interval_mean(log, Channel::WheelSpeed(wheel), t_prev, t_now).unwrap_or(0.0) * direction_sign(log, wheel, t_now)
}

/// Suspension frame from the corner heights held at `t`.
pub fn suspension_frame_at<T: Scalar>(log: &SignalLog, t: Micros) -> Result<SuspensionFrame<T>, EstimateError> {
    let mut heights = [T::zero(); 4];
    for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
        let channel = Channel::SuspHeight(wheel);
        let s = log.held(channel, t).ok_or(SignalError::MissingChannel(channel))?;
        heights[i] = T::lit(s.value);
    }
    Ok(SuspensionFrame::new(heights, t)?)
}

/// Mean corner heights over `[t0, t1]`.
pub fn mean_suspension_frame<T: Scalar>(
    log: &SignalLog,
    t0: Micros,
    t1: Micros,
) -> Result<SuspensionFrame<T>, EstimateError> {
    let mut heights = [T::zero(); 4];
    for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
        let channel = Channel::SuspHeight(wheel);
        let samples = log.range(channel, t0, t1);
        if samples.is_empty() {
            return Err(SignalError::MissingChannel(channel).into());
        }
        heights[i] = T::lit(samples.iter().map(|s| s.value).sum::<f64>() / samples.len() as f64);
    }
    Ok(SuspensionFrame::new(heights, t1)?)
}

/// World-frame sensor pose for every pose of `trajectory`, compensating the
/// body attitude from the suspension heights held at each frame.
pub fn sensor_poses<T: Scalar>(
    log: &SignalLog,
    trajectory: &Trajectory<T>,
    geom: &VehicleGeometry<T>,
    extrinsics: &SensorExtrinsics<T>,
    reference: &SuspensionPlane<T>,
) -> Result<Vec<(Micros, SensorPose<T>)>, EstimateError> {
    trajectory
        .poses()
        .iter()
        .map(|pose| {
            let frame = suspension_frame_at(log, pose.t)?;
            let live = fit_plane(&frame, geom)?;
            let vehicle = compensated_sensor_pose(extrinsics, &live, reference);
            Ok((pose.t, sensor_pose_world(pose, &vehicle)))
        })
        .collect()
}

/// Height of the sensor above its settled position and the sensor's pitch
/// change, for reporting.
pub fn height_and_pitch<T: Scalar>(settled: &SensorExtrinsics<T>, pose: &SensorPose<T>) -> (T, T) {
    let dz = pose.position.z - settled.position.z;
    // body rotation = R_eᵀ R_p maps vehicle axes; pitch from its X axis
    let body = settled.rotation.transpose() * pose.rotation;
    let x_axis = body.transpose() * Vector3::x();
    (dz, (-x_axis.z).atan2(x_axis.x))
}
