//! Kinematic ground truth and synthetic signal logs.
//!
//! A manoeuvre is a list of segments with polynomial speed and linear
//! curvature profiles. The datum (rear-axle midpoint) follows the unicycle
//! model `ṗ = v (cos θ, sin θ)`, `θ̇ = v κ`, integrated on a 10 µs grid. Signals
//! are sampled from the analytic profile at per-channel rates and phases,
//! except wheel ticks and the ground-truth poses, which come from the grid.

mod load;
pub mod scenarios;

pub use load::{simulate_load, LoadResult, LoadSpec, GRAVITY};

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Trajectory;
use crate::planar::{PlanarPose, VehicleGeometry};
use crate::signal::{Channel, ChannelSample, Micros, SignalLog, Wheel};

/// Integration step of the ground truth, µs.
pub const FINE_STEP_US: Micros = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidSpec(msg.into())
}

/// One manoeuvre segment. `None` for `v0`/`kappa0` continues from the end of
/// the previous segment (zero for the first).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub accel: f64,
    #[serde(default)]
    pub jerk: f64,
    #[serde(default)]
    pub kappa0: Option<f64>,
    #[serde(default)]
    pub kappa_rate: f64,
}

impl Segment {
    pub fn hold(duration: f64) -> Self {
        Self {
            duration,
            v0: None,
            accel: 0.0,
            jerk: 0.0,
            kappa0: None,
            kappa_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRate {
    pub period_us: Micros,
    /// First emission time; drawn uniformly from `[0, period)` when absent.
    #[serde(default)]
    pub phase_us: Option<Micros>,
}

impl ChannelRate {
    pub const fn every(period_us: Micros) -> Self {
        Self {
            period_us,
            phase_us: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalRates {
    pub yaw_rate: ChannelRate,
    pub wheel_speed: ChannelRate,
    #[serde(default)]
    pub wheel_tick: Option<ChannelRate>,
    #[serde(default)]
    pub wheel_dir: Option<ChannelRate>,
    #[serde(default)]
    pub front_wheel_angle: Option<ChannelRate>,
    #[serde(default)]
    pub susp_height: Option<ChannelRate>,
}

impl Default for SignalRates {
    fn default() -> Self {
        Self {
            yaw_rate: ChannelRate::every(20_000),
            wheel_speed: ChannelRate::every(20_000),
            wheel_tick: Some(ChannelRate::every(20_000)),
            wheel_dir: Some(ChannelRate::every(20_000)),
            front_wheel_angle: Some(ChannelRate::every(40_000)),
            susp_height: None,
        }
    }
}

/// Gaussian noise standard deviations in channel units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub yaw_rate: f64,
    #[serde(default)]
    pub wheel_speed: f64,
    #[serde(default)]
    pub front_wheel_angle: f64,
    #[serde(default)]
    pub susp_height: f64,
}

fn default_ride_heights() -> [f64; 4] {
    [0.36, 0.36, 0.35, 0.35]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManoeuvreSpec {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub rates: SignalRates,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Bias added to the front wheel angle, rad.
    #[serde(default)]
    pub ackermann_error: f64,
    /// Constant yaw-rate sensor offset, rad/s.
    #[serde(default)]
    pub yaw_bias: f64,
    #[serde(default = "default_ride_heights")]
    pub ride_heights: [f64; 4],
    #[serde(default)]
    pub seed: u64,
}

impl ManoeuvreSpec {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self {
            segments,
            rates: SignalRates::default(),
            noise: NoiseSpec::default(),
            ackermann_error: 0.0,
            yaw_bias: 0.0,
            ride_heights: default_ride_heights(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.segments.is_empty() {
            return Err(invalid("at least one segment is required"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(invalid(format!("segment {i}: duration must be > 0")));
            }
            let finite = [s.accel, s.jerk, s.kappa_rate, s.v0.unwrap_or(0.0), s.kappa0.unwrap_or(0.0)];
            if finite.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("segment {i}: non-finite parameter")));
            }
        }
        let rates = [
            Some(self.rates.yaw_rate),
            Some(self.rates.wheel_speed),
            self.rates.wheel_tick,
            self.rates.wheel_dir,
            self.rates.front_wheel_angle,
            self.rates.susp_height,
        ];
        for r in rates.into_iter().flatten() {
            if r.period_us <= 0 {
                return Err(invalid("channel periods must be > 0"));
            }
            if r.phase_us.is_some_and(|p| p < 0) {
                return Err(invalid("channel phases must be >= 0"));
            }
        }
        let noise = [
            self.noise.yaw_rate,
            self.noise.wheel_speed,
            self.noise.front_wheel_angle,
            self.noise.susp_height,
        ];
        if noise.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("noise deviations must be finite and >= 0"));
        }
        if !self.ackermann_error.is_finite() || !self.yaw_bias.is_finite() {
            return Err(invalid("biases must be finite"));
        }
        Ok(())
    }

    pub fn duration_us(&self) -> Micros {
        self.segments
            .iter()
            .map(|s| (s.duration * 1e6).round() as Micros)
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct ResolvedSegment {
    start_us: Micros,
    end_us: Micros,
    v0: f64,
    accel: f64,
    jerk: f64,
    kappa0: f64,
    kappa_rate: f64,
}

/// Speed and curvature as functions of time.
#[derive(Debug, Clone)]
pub struct Profile {
    segments: Vec<ResolvedSegment>,
}

/// Kinematic state of the datum at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    /// Signed longitudinal speed, m/s.
    pub v: f64,
    pub kappa: f64,
}

impl KinematicState {
    pub fn yaw_rate(&self) -> f64 {
        self.v * self.kappa
    }

    /// Speed magnitude of a point at `w` in the vehicle frame.
    pub fn point_speed(&self, w: &Vector2<f64>) -> f64 {
        self.v.abs() * ((1.0 - self.kappa * w.y).powi(2) + (self.kappa * w.x).powi(2)).sqrt()
    }
}

impl Profile {
    pub fn new(spec: &ManoeuvreSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let mut segments = Vec::with_capacity(spec.segments.len());
        let (mut v_end, mut k_end, mut start) = (0.0, 0.0, 0);
        for s in &spec.segments {
            let len = (s.duration * 1e6).round() as Micros;
            let v0 = s.v0.unwrap_or(v_end);
            let kappa0 = s.kappa0.unwrap_or(k_end);
            let resolved = ResolvedSegment {
                start_us: start,
                end_us: start + len,
                v0,
                accel: s.accel,
                jerk: s.jerk,
                kappa0,
                kappa_rate: s.kappa_rate,
            };
            let end = resolved.eval(resolved.end_us);
            v_end = end.v;
            k_end = end.kappa;
            start += len;
            segments.push(resolved);
        }
        Ok(Self { segments })
    }

    pub fn duration_us(&self) -> Micros {
        self.segments.last().map_or(0, |s| s.end_us)
    }

    /// State at `t` µs; the last segment is held past the end.
    pub fn state(&self, t: Micros) -> KinematicState {
        let i = self
            .segments
            .partition_point(|s| s.end_us <= t)
            .min(self.segments.len() - 1);
        self.segments[i].eval(t)
    }
}

impl ResolvedSegment {
    fn eval(&self, t: Micros) -> KinematicState {
        let tau = (t - self.start_us) as f64 * 1e-6;
        KinematicState {
            v: self.v0 + self.accel * tau + 0.5 * self.jerk * tau * tau,
            kappa: self.kappa0 + self.kappa_rate * tau,
        }
    }
}

/// Output of one simulation run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub log: SignalLog,
    pub truth: Trajectory<f64>,
}

fn emission_times(rate: ChannelRate, phase: Micros, end: Micros) -> Vec<Micros> {
    let mut out = Vec::new();
    let mut t = phase;
    while t <= end {
        out.push(t);
        t += rate.period_us;
    }
    out
}

fn phase_of(rate: ChannelRate, rng: &mut ChaCha8Rng) -> Micros {
    let drawn = rng.random_range(0..rate.period_us);
    rate.phase_us.unwrap_or(drawn)
}

/// Integrates the ground truth and synthesizes the signal log in one pass.
/// Truth poses are emitted every `truth_dt_us`, which must be a multiple of
/// [`FINE_STEP_US`].
pub fn simulate(
    spec: &ManoeuvreSpec,
    geom: &VehicleGeometry<f64>,
    truth_dt_us: Micros,
) -> Result<Simulation, SimError> {
    geom.validate().map_err(|e| invalid(e.to_string()))?;
    if truth_dt_us <= 0 || truth_dt_us % FINE_STEP_US != 0 {
        return Err(invalid(format!(
            "truth step must be a positive multiple of {FINE_STEP_US} us"
        )));
    }
    let profile = Profile::new(spec)?;
    let end = profile.duration_us();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rates = spec.rates;

    // Phases are drawn in a fixed order whether or not they are overridden.
    let yaw_phase = phase_of(rates.yaw_rate, &mut rng);
    let speed_phase = Wheel::ALL.map(|_| phase_of(rates.wheel_speed, &mut rng));
    let tick_phase = rates.wheel_tick.map(|r| Wheel::ALL.map(|_| phase_of(r, &mut rng)));
    let dir_phase = rates.wheel_dir.map(|r| Wheel::ALL.map(|_| phase_of(r, &mut rng)));
    let angle_phase = rates.front_wheel_angle.map(|r| phase_of(r, &mut rng));
    let susp_phase = rates.susp_height.map(|r| Wheel::ALL.map(|_| phase_of(r, &mut rng)));

    let wheels = geom.wheel_positions();
    let mut records: Vec<ChannelSample> = Vec::new();
    let noisy = |sigma: f64| Normal::new(0.0, sigma).expect("validated sigma");

    let yaw_noise = noisy(spec.noise.yaw_rate);
    for t in emission_times(rates.yaw_rate, yaw_phase, end) {
        let value = profile.state(t).yaw_rate() + spec.yaw_bias + yaw_noise.sample(&mut rng);
        records.push(ChannelSample::new(t, Channel::YawRate, value));
    }

    let speed_noise = noisy(spec.noise.wheel_speed);
    for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
        for t in emission_times(rates.wheel_speed, speed_phase[i], end) {
            let state = profile.state(t);
            let clean = state.point_speed(&wheels[i]);
            let value = if clean == 0.0 {
                0.0
            } else {
                (clean + speed_noise.sample(&mut rng)).max(0.0)
            };
            records.push(ChannelSample::new(t, Channel::WheelSpeed(wheel), value));
        }
    }

    if let (Some(rate), Some(phase)) = (rates.wheel_dir, dir_phase) {
        for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
            for t in emission_times(rate, phase[i], end) {
                let v = profile.state(t).v;
                let dir = if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                records.push(ChannelSample::new(t, Channel::WheelDir(wheel), dir));
            }
        }
    }

    if let (Some(rate), Some(phase)) = (rates.front_wheel_angle, angle_phase) {
        let angle_noise = noisy(spec.noise.front_wheel_angle);
        for t in emission_times(rate, phase, end) {
            let kappa = profile.state(t).kappa;
            let value = (geom.wheelbase * kappa).atan() + spec.ackermann_error + angle_noise.sample(&mut rng);
            records.push(ChannelSample::new(t, Channel::FrontWheelAngle, value));
        }
    }

    if let (Some(rate), Some(phase)) = (rates.susp_height, susp_phase) {
        let height_noise = noisy(spec.noise.susp_height);
        for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
            for t in emission_times(rate, phase[i], end) {
                let value = spec.ride_heights[i] + height_noise.sample(&mut rng);
                records.push(ChannelSample::new(t, Channel::SuspHeight(wheel), value));
            }
        }
    }

    let tick_times: Vec<Vec<Micros>> = match (rates.wheel_tick, tick_phase) {
        (Some(rate), Some(phase)) => phase.iter().map(|&p| emission_times(rate, p, end)).collect(),
        _ => vec![Vec::new(); 4],
    };
    let per_tick = geom.distance_per_tick();
    let (truth, tick_distances) = integrate_truth(&profile, &wheels, truth_dt_us, &tick_times);
    for (i, wheel) in Wheel::ALL.into_iter().enumerate() {
        for (&t, &d) in tick_times[i].iter().zip(&tick_distances[i]) {
            let ticks = (d / per_tick + 1e-9).floor();
            records.push(ChannelSample::new(t, Channel::WheelTick(wheel), ticks));
        }
    }

    let log = SignalLog::from_samples(records).map_err(|e| invalid(e.to_string()))?;
    Ok(Simulation { log, truth })
}

/// Fine-grid integration of the datum pose and of each wheel's travelled
/// distance, sampled at the truth cadence and at the requested tick times.
fn integrate_truth(
    profile: &Profile,
    wheels: &[Vector2<f64>; 4],
    truth_dt_us: Micros,
    tick_times: &[Vec<Micros>],
) -> (Trajectory<f64>, Vec<Vec<f64>>) {
    let end = profile.duration_us();
    let h = FINE_STEP_US as f64 * 1e-6;
    let mut poses = Vec::with_capacity((end / truth_dt_us) as usize + 1);
    let mut ticks: Vec<Vec<f64>> = tick_times.iter().map(|t| Vec::with_capacity(t.len())).collect();
    let mut next_tick = vec![0usize; tick_times.len()];

    let mut t = 0;
    let mut state = profile.state(0);
    let mut pos = Vector2::zeros();
    let mut theta: f64 = 0.0;
    let mut dist = [0.0; 4];
    let mut speeds = wheels.map(|w| state.point_speed(&w));
    poses.push(PlanarPose::new(0.0, 0.0, 0.0, 0));
    for (i, times) in tick_times.iter().enumerate() {
        while next_tick[i] < times.len() && times[next_tick[i]] <= 0 {
            ticks[i].push(0.0);
            next_tick[i] += 1;
        }
    }

    while t < end {
        let t1 = t + FINE_STEP_US;
        let s1 = profile.state(t1);
        let theta1 = theta + 0.5 * (state.yaw_rate() + s1.yaw_rate()) * h;
        let (sin0, cos0) = theta.sin_cos();
        let (sin1, cos1) = theta1.sin_cos();
        pos += Vector2::new(state.v * cos0 + s1.v * cos1, state.v * sin0 + s1.v * sin1) * (0.5 * h);
        let speeds1 = wheels.map(|w| s1.point_speed(&w));
        let dist0 = dist;
        for i in 0..4 {
            dist[i] += 0.5 * (speeds[i] + speeds1[i]) * h;
        }
        for (i, times) in tick_times.iter().enumerate() {
            while next_tick[i] < times.len() && times[next_tick[i]] <= t1 {
                let u = (times[next_tick[i]] - t) as f64 / FINE_STEP_US as f64;
                ticks[i].push(dist0[i] + (dist[i] - dist0[i]) * u);
                next_tick[i] += 1;
            }
        }
        t = t1;
        theta = theta1;
        state = s1;
        speeds = speeds1;
        if t % truth_dt_us == 0 {
            poses.push(PlanarPose::new(pos.x, pos.y, theta, t));
        }
    }
    let truth = Trajectory::new(poses).expect("fine grid is increasing");
    (truth, ticks)
}

pub fn generate_ground_truth(
    spec: &ManoeuvreSpec,
    geom: &VehicleGeometry<f64>,
    truth_dt_us: Micros,
) -> Result<Trajectory<f64>, SimError> {
    let mut quiet = spec.clone();
    quiet.rates.wheel_tick = None;
    Ok(simulate(&quiet, geom, truth_dt_us)?.truth)
}

pub fn synthesize_signals(spec: &ManoeuvreSpec, geom: &VehicleGeometry<f64>) -> Result<SignalLog, SimError> {
    Ok(simulate(spec, geom, FINE_STEP_US)?.log)
}
