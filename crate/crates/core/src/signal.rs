//! Signal log ingestion, windowing and yaw-rate offset calibration.
//!
//! A [`SignalLog`] holds one timestamp-sorted sample sequence per [`Channel`].
//! It is built once (from CSV or from samples) and then only read, so it can be
//! shared freely between estimator runs.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

/// Microseconds since the log epoch.
pub type Micros = i64;

/// Header written by [`SignalLog::write_csv`].
pub const CSV_HEADER: &str = "timestamp_us,channel,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wheel {
    Rl,
    Rr,
    Fl,
    Fr,
}

impl Wheel {
    /// Fixed ordering used for every per-wheel array in the crate.
    pub const ALL: [Wheel; 4] = [Wheel::Rl, Wheel::Rr, Wheel::Fl, Wheel::Fr];

    pub fn index(self) -> usize {
        match self {
            Wheel::Rl => 0,
            Wheel::Rr => 1,
            Wheel::Fl => 2,
            Wheel::Fr => 3,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Wheel::Rl => "rl",
            Wheel::Rr => "rr",
            Wheel::Fl => "fl",
            Wheel::Fr => "fr",
        }
    }

    pub fn is_left(self) -> bool {
        matches!(self, Wheel::Rl | Wheel::Fl)
    }

    pub fn is_front(self) -> bool {
        matches!(self, Wheel::Fl | Wheel::Fr)
    }

    fn from_suffix(s: &str) -> Option<Wheel> {
        Wheel::ALL.into_iter().find(|w| w.suffix() == s)
    }
}

/// Signal catalogue. Values are SI: rad/s, m/s, ticks, {-1, 0, 1}, rad, m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    YawRate,
    WheelSpeed(Wheel),
    WheelTick(Wheel),
    WheelDir(Wheel),
    FrontWheelAngle,
    SuspHeight(Wheel),
}

impl Channel {
    pub fn all() -> Vec<Channel> {
        let mut out = vec![Channel::YawRate];
        out.extend(Wheel::ALL.map(Channel::WheelSpeed));
        out.extend(Wheel::ALL.map(Channel::WheelTick));
        out.extend(Wheel::ALL.map(Channel::WheelDir));
        out.push(Channel::FrontWheelAngle);
        out.extend(Wheel::ALL.map(Channel::SuspHeight));
        out
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::YawRate => f.write_str("yaw_rate"),
            Channel::WheelSpeed(w) => write!(f, "wheel_speed_{}", w.suffix()),
            Channel::WheelTick(w) => write!(f, "wheel_tick_{}", w.suffix()),
            Channel::WheelDir(w) => write!(f, "wheel_dir_{}", w.suffix()),
            Channel::FrontWheelAngle => f.write_str("front_wheel_angle"),
            Channel::SuspHeight(w) => write!(f, "susp_height_{}", w.suffix()),
        }
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yaw_rate" => return Ok(Channel::YawRate),
            "front_wheel_angle" => return Ok(Channel::FrontWheelAngle),
            _ => {}
        }
        let (prefix, suffix) = s.rsplit_once('_').ok_or(())?;
        let wheel = Wheel::from_suffix(suffix).ok_or(())?;
        match prefix {
            "wheel_speed" => Ok(Channel::WheelSpeed(wheel)),
            "wheel_tick" => Ok(Channel::WheelTick(wheel)),
            "wheel_dir" => Ok(Channel::WheelDir(wheel)),
            "susp_height" => Ok(Channel::SuspHeight(wheel)),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: Micros,
    pub value: f64,
}

impl Sample {
    pub fn new(t: Micros, value: f64) -> Self {
        Self { t, value }
    }
}

/// One ingestion record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub timestamp: Micros,
    pub channel: Channel,
    pub value: f64,
}

impl ChannelSample {
    pub fn new(timestamp: Micros, channel: Channel, value: f64) -> Self {
        Self {
            timestamp,
            channel,
            value,
        }
    }
}

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown channel `{name}`")]
    UnknownChannel { line: usize, name: String },
    #[error("{channel} at t={t}us: conflicting values {first} and {second}")]
    ConflictingDuplicate {
        channel: Channel,
        t: Micros,
        first: f64,
        second: f64,
    },
    #[error("{channel} at t={t}us: {reason}")]
    InvalidValue {
        channel: Channel,
        t: Micros,
        reason: String,
    },
    #[error("log has no `{0}` samples")]
    MissingChannel(Channel),
    #[error("{channel}: {found} samples in window, at least 3 required")]
    InsufficientSamples { channel: Channel, found: usize },
    #[error("t={t}us is outside the log time range")]
    OutOfRange { t: Micros },
    #[error("window length must be positive")]
    InvalidLength,
    #[error("no standstill interval with at least {required} yaw-rate samples (best: {best})")]
    NoStandstill { best: usize, required: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Samples of one channel over `[t_ref, t_frame]`, both ends inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub channel: Channel,
    pub samples: Vec<Sample>,
    pub t_ref: Micros,
    pub t_frame: Micros,
}

impl SignalWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Yaw-rate sensor bias measured at standstill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawOffset {
    pub offset: f64,
    pub sample_count: usize,
    /// Seconds covered by the samples used.
    pub standstill_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetMode {
    /// Average over every qualifying standstill in the log.
    AccumulateAll,
    /// Use only the last qualifying standstill.
    LatestStandstill,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub min_samples: usize,
    /// Wheel speeds with |v| <= epsilon count as stopped.
    pub speed_epsilon: f64,
    pub mode: OffsetMode,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            min_samples: 50,
            speed_epsilon: 0.0,
            mode: OffsetMode::AccumulateAll,
        }
    }
}

/// Per-channel, timestamp-sorted sample store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalLog {
    channels: BTreeMap<Channel, Vec<Sample>>,
    yaw_offset: Option<YawOffset>,
}

impl SignalLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a log from unordered records: sorts each channel, drops exact
    /// duplicates and validates channel-specific value constraints.
    pub fn from_samples<I>(records: I) -> Result<Self, SignalError>
    where
        I: IntoIterator<Item = ChannelSample>,
    {
        let mut channels: BTreeMap<Channel, Vec<Sample>> = BTreeMap::new();
        for r in records {
            if r.timestamp < 0 {
                return Err(SignalError::InvalidValue {
                    channel: r.channel,
                    t: r.timestamp,
                    reason: "negative timestamp".into(),
                });
            }
            if !r.value.is_finite() {
                return Err(SignalError::InvalidValue {
                    channel: r.channel,
                    t: r.timestamp,
                    reason: "non-finite value".into(),
                });
            }
            channels
                .entry(r.channel)
                .or_default()
                .push(Sample::new(r.timestamp, r.value));
        }
        for (channel, samples) in channels.iter_mut() {
            samples.sort_by_key(|s| s.t);
            let mut deduped: Vec<Sample> = Vec::with_capacity(samples.len());
            for s in samples.drain(..) {
                match deduped.last() {
                    Some(prev) if prev.t == s.t => {
                        if prev.value.to_bits() != s.value.to_bits() {
                            return Err(SignalError::ConflictingDuplicate {
                                channel: *channel,
                                t: s.t,
                                first: prev.value,
                                second: s.value,
                            });
                        }
                    }
                    _ => deduped.push(s),
                }
            }
            validate_channel(*channel, &deduped)?;
            *samples = deduped;
        }
        Ok(Self {
            channels,
            yaw_offset: None,
        })
    }

    /// Parses the `timestamp_us,channel,value` CSV format. A header line and
    /// `#` comments are accepted anywhere.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, SignalError> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(SignalError::Parse {
                    line: lineno,
                    reason: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            if fields[0] == "timestamp_us" {
                continue;
            }
            let timestamp: Micros = fields[0].parse().map_err(|_| SignalError::Parse {
                line: lineno,
                reason: format!("bad timestamp `{}`", fields[0]),
            })?;
            let channel: Channel = fields[1].parse().map_err(|_| SignalError::UnknownChannel {
                line: lineno,
                name: fields[1].to_string(),
            })?;
            let value: f64 = fields[2].parse().map_err(|_| SignalError::Parse {
                line: lineno,
                reason: format!("bad value `{}`", fields[2]),
            })?;
            if !value.is_finite() {
                return Err(SignalError::Parse {
                    line: lineno,
                    reason: format!("non-finite value `{}`", fields[2]),
                });
            }
            if timestamp < 0 {
                return Err(SignalError::Parse {
                    line: lineno,
                    reason: "negative timestamp".into(),
                });
            }
            records.push(ChannelSample::new(timestamp, channel, value));
        }
        Self::from_samples(records)
    }

    pub fn parse_str(text: &str) -> Result<Self, SignalError> {
        Self::read_csv(text.as_bytes())
    }

    /// Writes raw samples interleaved by time. Values use the shortest
    /// round-trip representation, so re-ingesting is bit exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<(Micros, Channel, f64)> = self
            .channels
            .iter()
            .flat_map(|(c, s)| s.iter().map(move |s| (s.t, *c, s.value)))
            .collect();
        rows.sort_by_key(|r| (r.0, r.1));
        writeln!(out, "{CSV_HEADER}")?;
        for (t, c, v) in rows {
            writeln!(out, "{t},{c},{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.channels.keys().copied()
    }

    pub fn has(&self, channel: Channel) -> bool {
        self.channels.get(&channel).is_some_and(|s| !s.is_empty())
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.channels.get(&channel).map_or(0, Vec::len)
    }

    pub fn total_samples(&self) -> usize {
        self.channels.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_samples() == 0
    }

    /// Samples as stored, without offset correction.
    pub fn raw(&self, channel: Channel) -> &[Sample] {
        self.channels.get(&channel).map_or(&[], Vec::as_slice)
    }

    /// Samples as served to estimators: yaw rate has the calibrated offset removed.
    pub fn samples(&self, channel: Channel) -> impl Iterator<Item = Sample> + '_ {
        let offset = self.offset_for(channel);
        self.raw(channel)
            .iter()
            .map(move |s| Sample::new(s.t, s.value - offset))
    }

    fn offset_for(&self, channel: Channel) -> f64 {
        match (channel, self.yaw_offset) {
            (Channel::YawRate, Some(o)) => o.offset,
            _ => 0.0,
        }
    }

    pub fn set_yaw_offset(&mut self, offset: Option<YawOffset>) {
        self.yaw_offset = offset;
    }

    pub fn yaw_offset(&self) -> Option<YawOffset> {
        self.yaw_offset
    }

    /// First and last timestamp over all channels.
    pub fn time_range(&self) -> Option<(Micros, Micros)> {
        let first = self.channels.values().filter_map(|s| s.first()).map(|s| s.t).min()?;
        let last = self.channels.values().filter_map(|s| s.last()).map(|s| s.t).max()?;
        Some((first, last))
    }

    /// All samples with `t_frame - length <= t <= t_frame`.
    pub fn window(
        &self,
        channel: Channel,
        t_frame: Micros,
        length: Micros,
    ) -> Result<SignalWindow, SignalError> {
        if length <= 0 {
            return Err(SignalError::InvalidLength);
        }
        let (first, last) = self.time_range().ok_or(SignalError::OutOfRange { t: t_frame })?;
        if t_frame < first || t_frame > last {
            return Err(SignalError::OutOfRange { t: t_frame });
        }
        let t_ref = t_frame - length;
        let raw = self.raw(channel);
        let lo = raw.partition_point(|s| s.t < t_ref);
        let hi = raw.partition_point(|s| s.t <= t_frame);
        let offset = self.offset_for(channel);
        let samples: Vec<Sample> = raw[lo..hi]
            .iter()
            .map(|s| Sample::new(s.t, s.value - offset))
            .collect();
        if samples.len() < 3 {
            return Err(SignalError::InsufficientSamples {
                channel,
                found: samples.len(),
            });
        }
        Ok(SignalWindow {
            channel,
            samples,
            t_ref,
            t_frame,
        })
    }

    /// Latest served sample with `t' <= t` (zero-order hold).
    pub fn held(&self, channel: Channel, t: Micros) -> Option<Sample> {
        let raw = self.raw(channel);
        let idx = raw.partition_point(|s| s.t <= t);
        let offset = self.offset_for(channel);
        idx.checked_sub(1)
            .map(|i| Sample::new(raw[i].t, raw[i].value - offset))
    }

    /// Served samples with `t0 <= t <= t1`.
    pub fn range(&self, channel: Channel, t0: Micros, t1: Micros) -> Vec<Sample> {
        let raw = self.raw(channel);
        let lo = raw.partition_point(|s| s.t < t0);
        let hi = raw.partition_point(|s| s.t <= t1);
        let offset = self.offset_for(channel);
        raw[lo..hi]
            .iter()
            .map(|s| Sample::new(s.t, s.value - offset))
            .collect()
    }
}

fn validate_channel(channel: Channel, samples: &[Sample]) -> Result<(), SignalError> {
    let invalid = |t, reason: &str| SignalError::InvalidValue {
        channel,
        t,
        reason: reason.to_string(),
    };
    match channel {
        Channel::WheelTick(_) => {
            let mut prev: Option<f64> = None;
            for s in samples {
                if s.value < 0.0 || s.value.fract() != 0.0 {
                    return Err(invalid(s.t, "tick count must be a non-negative integer"));
                }
                if prev.is_some_and(|p| s.value < p) {
                    return Err(invalid(s.t, "tick count decreased"));
                }
                prev = Some(s.value);
            }
        }
        Channel::WheelDir(_) => {
            if let Some(s) = samples
                .iter()
                .find(|s| s.value != -1.0 && s.value != 0.0 && s.value != 1.0)
            {
                return Err(invalid(s.t, "direction must be -1, 0 or +1"));
            }
        }
        _ => {}
    }
    Ok(())
}

/// A maximal interval during which all four wheel speeds are (near) zero.
/// `end` is exclusive; `None` means the standstill lasts to the end of the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Standstill {
    pub start: Micros,
    pub end: Option<Micros>,
}

impl Standstill {
    pub fn contains(&self, t: Micros) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

/// Finds standstill intervals by holding each wheel's latest speed sample.
pub fn standstill_intervals(log: &SignalLog, epsilon: f64) -> Result<Vec<Standstill>, SignalError> {
    let mut events: Vec<(Micros, usize, f64)> = Vec::new();
    for wheel in Wheel::ALL {
        let channel = Channel::WheelSpeed(wheel);
        if !log.has(channel) {
            return Err(SignalError::MissingChannel(channel));
        }
        events.extend(log.raw(channel).iter().map(|s| (s.t, wheel.index(), s.value)));
    }
    events.sort_by_key(|e| (e.0, e.1));

    let mut held: [Option<f64>; 4] = [None; 4];
    let mut intervals = Vec::new();
    let mut open: Option<Micros> = None;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            held[events[i].1] = Some(events[i].2);
            i += 1;
        }
        let stopped = held.iter().all(|v| v.is_some_and(|v| v.abs() <= epsilon));
        match (stopped, open) {
            (true, None) => open = Some(t),
            (false, Some(start)) => {
                intervals.push(Standstill {
                    start,
                    end: Some(t),
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        intervals.push(Standstill { start, end: None });
    }
    Ok(intervals)
}

/// Averages raw yaw-rate samples taken while the vehicle stands still.
pub fn calibrate_yaw_offset(
    log: &SignalLog,
    config: &CalibrationConfig,
) -> Result<YawOffset, SignalError> {
    if !log.has(Channel::YawRate) {
        return Err(SignalError::MissingChannel(Channel::YawRate));
    }
    let yaw = log.raw(Channel::YawRate);
    let mut qualifying: Vec<&[Sample]> = Vec::new();
    let mut best = 0;
    for interval in standstill_intervals(log, config.speed_epsilon)? {
        let lo = yaw.partition_point(|s| s.t < interval.start);
        let hi = match interval.end {
            Some(end) => yaw.partition_point(|s| s.t < end),
            None => yaw.len(),
        };
        let samples = &yaw[lo..hi];
        best = best.max(samples.len());
        if samples.len() >= config.min_samples {
            qualifying.push(samples);
        }
    }
    let chosen: Vec<&[Sample]> = match config.mode {
        OffsetMode::AccumulateAll => qualifying,
        OffsetMode::LatestStandstill => qualifying.last().copied().into_iter().collect(),
    };
    if chosen.is_empty() {
        return Err(SignalError::NoStandstill {
            best,
            required: config.min_samples,
        });
    }
    let mut sum = 0.0;
    let mut count = 0;
    let mut duration_us = 0;
    for samples in &chosen {
        sum += samples.iter().map(|s| s.value).sum::<f64>();
        count += samples.len();
        duration_us += samples[samples.len() - 1].t - samples[0].t;
    }
    Ok(YawOffset {
        offset: sum / count as f64,
        sample_count: count,
        standstill_duration: duration_us as f64 * 1e-6,
    })
}
