//! Trajectory comparison: final-pose and heading errors, cumulative spread
//! against the reference polyline, and finite-difference velocities.

use nalgebra::Vector2;
use thiserror::Error;

use crate::planar::PlanarPose;
use crate::signal::Micros;
use crate::{wrap_angle, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trajectory has {found} poses, at least {needed} required")]
    TooShort { needed: usize, found: usize },
    #[error("timestamps must be strictly increasing (pose {index})")]
    InvalidTimestamps { index: usize },
    #[error("reference trajectory has zero length")]
    DegenerateReference,
    #[error("pairwise denominator needs equal sample counts (estimate {n}, reference {m})")]
    SampleCountMismatch { n: usize, m: usize },
}

/// Poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    poses: Vec<PlanarPose<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(poses: Vec<PlanarPose<T>>) -> Result<Self, MetricsError> {
        if let Some(i) = poses.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(MetricsError::InvalidTimestamps { index: i + 1 });
        }
        Ok(Self { poses })
    }

    pub fn empty() -> Self {
        Self { poses: Vec::new() }
    }

    pub fn push(&mut self, pose: PlanarPose<T>) -> Result<(), MetricsError> {
        if self.poses.last().is_some_and(|last| pose.t <= last.t) {
            return Err(MetricsError::InvalidTimestamps {
                index: self.poses.len(),
            });
        }
        self.poses.push(pose);
        Ok(())
    }

    pub fn poses(&self) -> &[PlanarPose<T>] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> Option<&PlanarPose<T>> {
        self.poses.first()
    }

    pub fn last(&self) -> Option<&PlanarPose<T>> {
        self.poses.last()
    }

    pub fn positions(&self) -> Vec<Vector2<T>> {
        self.poses.iter().map(|p| p.position).collect()
    }

    /// Polyline arc length.
    pub fn length(&self) -> T {
        self.poses.windows(2).fold(T::zero(), |acc, w| {
            let d = w[1].position - w[0].position;
            acc + d.dot(&d).sqrt()
        })
    }

    /// Pose at `t` by linear interpolation of position and shortest-arc
    /// interpolation of heading; clamped to the end poses outside the range.
    pub fn interpolate(&self, t: Micros) -> Option<PlanarPose<T>> {
        let first = self.poses.first()?;
        let last = self.poses.last()?;
        if t <= first.t {
            return Some(PlanarPose { t, ..*first });
        }
        if t >= last.t {
            return Some(PlanarPose { t, ..*last });
        }
        let i = self.poses.partition_point(|p| p.t <= t);
        let (a, b) = (&self.poses[i - 1], &self.poses[i]);
        let u = T::from_i64(t - a.t).expect("i64 fits") / T::from_i64(b.t - a.t).expect("i64 fits");
        Some(PlanarPose {
            position: a.position + (b.position - a.position) * u,
            heading: wrap_angle(a.heading + wrap_angle(b.heading - a.heading) * u),
            t,
        })
    }

    /// Applies the rigid motion taking `from` onto `to` to every pose.
    pub fn rigidly_moved(&self, from: &PlanarPose<T>, to: &PlanarPose<T>) -> Self {
        let rot = crate::planar::rotation2(to.heading - from.heading);
        let poses = self
            .poses
            .iter()
            .map(|p| PlanarPose {
                position: rot * (p.position - from.position) + to.position,
                heading: wrap_angle(p.heading + to.heading - from.heading),
                t: p.t,
            })
            .collect();
        Self { poses }
    }
}

fn require<T>(traj: &Trajectory<T>, needed: usize) -> Result<(), MetricsError> {
    if traj.poses.len() < needed {
        return Err(MetricsError::TooShort {
            needed,
            found: traj.poses.len(),
        });
    }
    Ok(())
}

/// Final position error in the reference's final heading frame, unsigned.
pub fn e_pos<T: Scalar>(est: &Trajectory<T>, reference: &Trajectory<T>) -> Result<(T, T), MetricsError> {
    require(est, 1)?;
    require(reference, 1)?;
    let r = reference.poses[reference.len() - 1];
    let e = est.poses[est.len() - 1];
    let local = r.rotation().transpose() * (r.position - e.position);
    Ok((local.x.abs(), local.y.abs()))
}

/// Final heading difference in `[0, π]` radians.
pub fn e_alig<T: Scalar>(est: &Trajectory<T>, reference: &Trajectory<T>) -> Result<T, MetricsError> {
    require(est, 1)?;
    require(reference, 1)?;
    let r = reference.poses[reference.len() - 1].heading;
    let e = est.poses[est.len() - 1].heading;
    Ok(wrap_angle(r - e).abs())
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_to_segment<T: Scalar>(p: &Vector2<T>, a: &Vector2<T>, b: &Vector2<T>) -> T {
    let ab = b - a;
    let ap = p - a;
    let len2 = ab.dot(&ab);
    let u = if len2 > T::zero() {
        (ap.dot(&ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let d = ap - ab * u;
    d.dot(&d).sqrt()
}

/// Shortest distance from `p` to the polyline through `points`.
pub fn point_to_polyline<T: Scalar>(p: &Vector2<T>, points: &[Vector2<T>]) -> T {
    match points {
        [] => T::infinity(),
        [only] => {
            let d = p - only;
            d.dot(&d).sqrt()
        }
        _ => points
            .windows(2)
            .map(|w| point_to_segment(p, &w[0], &w[1]))
            .fold(T::infinity(), T::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// Reference arc length.
    #[default]
    ReferenceLength,
    /// `Σ_j ||p_R,j - p_j||` over paired samples; needs equal counts.
    PairwiseDistance,
}

/// Sum of point-to-reference distances over the estimated poses, divided by
/// the chosen denominator.
pub fn e_loc<T: Scalar>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    denominator: Denominator,
) -> Result<T, MetricsError> {
    require(est, 1)?;
    require(reference, 2)?;
    let poly = reference.positions();
    let numerator = est
        .poses
        .iter()
        .fold(T::zero(), |acc, p| acc + point_to_polyline(&p.position, &poly));
    let denom = match denominator {
        Denominator::ReferenceLength => reference.length(),
        Denominator::PairwiseDistance => {
            if est.len() != reference.len() {
                return Err(MetricsError::SampleCountMismatch {
                    n: est.len(),
                    m: reference.len(),
                });
            }
            reference.poses.iter().zip(&est.poses).fold(T::zero(), |acc, (r, e)| {
                let d = r.position - e.position;
                acc + d.dot(&d).sqrt()
            })
        }
    };
    if denom.is_nan() || denom <= T::zero() {
        if numerator == T::zero() {
            return Ok(T::zero());
        }
        return Err(MetricsError::DegenerateReference);
    }
    Ok(numerator / denom)
}

/// `(p_i - p_{i-1}) / (t_i - t_{i-1})` in m/s.
pub fn velocity_series<T: Scalar>(traj: &Trajectory<T>) -> Result<Vec<Vector2<T>>, MetricsError> {
    require(traj, 2)?;
    traj.poses
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if w[1].t <= w[0].t {
                return Err(MetricsError::InvalidTimestamps { index: i + 1 });
            }
            Ok((w[1].position - w[0].position) / T::from_micros(w[1].t - w[0].t))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport<T> {
    pub e_pos_x: T,
    pub e_pos_y: T,
    /// Radians.
    pub e_alig: T,
    pub e_loc: T,
    pub e_loc_prime: T,
    /// Estimated samples.
    pub n: usize,
    /// Reference samples.
    pub m: usize,
    /// Reference length, m.
    pub length: T,
}

pub const REPORT_HEADER: &str = "model,trajectory,length_m,e_pos_x,e_pos_y,e_alig_deg,e_loc,e_loc_prime";

impl<T: Scalar> MetricsReport<T> {
    pub fn e_alig_deg(&self) -> T {
        self.e_alig.to_degrees()
    }

    pub fn csv_row(&self, model: &str, trajectory: &str) -> String {
        format!(
            "{model},{trajectory},{:.3},{:.6},{:.6},{:.6},{:.9},{:.9e}",
            self.length,
            self.e_pos_x,
            self.e_pos_y,
            self.e_alig_deg(),
            self.e_loc,
            self.e_loc_prime.to_f64_lossy(),
        )
    }
}

pub fn evaluate<T: Scalar>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    denominator: Denominator,
) -> Result<MetricsReport<T>, MetricsError> {
    require(reference, 2)?;
    let (e_pos_x, e_pos_y) = e_pos(est, reference)?;
    let e_alig = e_alig(est, reference)?;
    let e_loc = e_loc(est, reference, denominator)?;
    let n = est.len();
    Ok(MetricsReport {
        e_pos_x,
        e_pos_y,
        e_alig,
        e_loc,
        e_loc_prime: e_loc / T::from_usize(n).expect("usize fits"),
        n,
        m: reference.len(),
        length: reference.length(),
    })
}
