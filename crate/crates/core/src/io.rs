//! File formats: trajectory CSV and GeoJSON, geometry / extrinsics /
//! reference-plane JSON, sensor-pose CSV and suspension-frame CSV.

use std::fmt::Write as _;
use std::io::BufRead;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MetricsError, Trajectory};
use crate::planar::{PlanarError, PlanarPose, VehicleGeometry};
use crate::signal::{Micros, Wheel};
use crate::simulator::LoadResult;
use crate::suspension::{
    fit_plane, SensorExtrinsics, SensorPose, SuspensionError, SuspensionFrame, SuspensionPlane,
};

pub const TRAJECTORY_HEADER: &str = "timestamp_us,x_m,y_m,heading_rad";
pub const SENSOR_POSE_HEADER: &str = "timestamp_us,x_m,y_m,z_m,r00,r01,r02,r10,r11,r12,r20,r21,r22";
pub const SUSPENSION_HEADER: &str =
    "index,mass_kg,load_x_m,load_y_m,h_rl_m,h_rr_m,h_fl_m,h_fr_m,f_rl_n,f_rr_n,f_fl_n,f_fr_n";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trajectory(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] PlanarError),
    #[error(transparent)]
    Suspension(#[from] SuspensionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn trajectory_to_csv(traj: &Trajectory<f64>) -> String {
    let mut out = String::with_capacity(32 * traj.len() + 40);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for p in traj.poses() {
        let _ = writeln!(out, "{},{},{},{}", p.t, p.x(), p.y(), p.heading);
    }
    out
}

pub fn read_trajectory_csv<R: BufRead>(reader: R) -> Result<Trajectory<f64>, FormatError> {
    let mut poses = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with("timestamp_us") {
            continue;
        }
        let parse_err = |reason: String| FormatError::Parse { line: i + 1, reason };
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let t: Micros = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("bad timestamp `{}`", fields[0])))?;
        let mut v = [0.0f64; 3];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| parse_err(format!("bad number `{f}`")))?;
            if !slot.is_finite() {
                return Err(parse_err(format!("non-finite value `{f}`")));
            }
        }
        poses.push(PlanarPose::new(v[0], v[1], v[2], t));
    }
    Ok(Trajectory::new(poses)?)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory<f64>, FormatError> {
    read_trajectory_csv(text.as_bytes())
}

/// GeoJSON `FeatureCollection` with one `LineString` in local metres.
pub fn trajectory_to_geojson(traj: &Trajectory<f64>, name: &str) -> String {
    let coords: Vec<[f64; 2]> = traj.poses().iter().map(|p| [p.x(), p.y()]).collect();
    let value = serde_json::json!({
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": {
                "name": name,
                "start_us": traj.first().map(|p| p.t),
                "end_us": traj.last().map(|p| p.t),
            },
            "geometry": { "type": "LineString", "coordinates": coords },
        }],
    });
    serde_json::to_string_pretty(&value).expect("json values serialize")
}

pub fn geometry_from_json(text: &str) -> Result<VehicleGeometry<f64>, FormatError> {
    let g: VehicleGeometry<f64> = serde_json::from_str(text)?;
    g.validate()?;
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtrinsicsFile {
    /// Row-major, maps vehicle-frame vectors into the sensor frame.
    rotation: [[f64; 3]; 3],
    position: [f64; 3],
}

fn matrix_from_rows(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| rows[r][c])
}

fn rows_of(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

pub fn extrinsics_from_json(text: &str) -> Result<SensorExtrinsics<f64>, FormatError> {
    let file: ExtrinsicsFile = serde_json::from_str(text)?;
    Ok(SensorExtrinsics::new(
        matrix_from_rows(&file.rotation),
        Vector3::from(file.position),
    )?)
}

pub fn extrinsics_to_json(ext: &SensorExtrinsics<f64>) -> String {
    let file = ExtrinsicsFile {
        rotation: rows_of(&ext.rotation),
        position: ext.position.into(),
    };
    serde_json::to_string_pretty(&file).expect("extrinsics serialize")
}

/// Settled suspension state captured by calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePlaneFile {
    /// `[x, y]` per wheel in [`Wheel::ALL`] order.
    pub wheel_positions: [[f64; 2]; 4],
    pub heights: [f64; 4],
    pub normal: [f64; 3],
    pub centroid: [f64; 3],
    pub residual: f64,
}

impl ReferencePlaneFile {
    pub fn capture(frame: &SuspensionFrame<f64>, geom: &VehicleGeometry<f64>) -> Result<Self, FormatError> {
        let plane = fit_plane(frame, geom)?;
        Ok(Self {
            wheel_positions: geom.wheel_positions().map(|w| [w.x, w.y]),
            heights: frame.heights,
            normal: plane.normal.into(),
            centroid: plane.centroid.into(),
            residual: plane.residual,
        })
    }

    /// Refits the plane from the stored points; the stored normal and
    /// centroid are informational.
    pub fn plane(&self) -> Result<SuspensionPlane<f64>, FormatError> {
        let frame = SuspensionFrame::new(self.heights, 0)?;
        let points: Vec<Vector3<f64>> = (0..4)
            .map(|i| Vector3::new(self.wheel_positions[i][0], self.wheel_positions[i][1], frame.heights[i]))
            .collect();
        Ok(crate::suspension::fit_plane_points(&points)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reference plane serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn sensor_poses_to_csv(poses: &[(Micros, SensorPose<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(SENSOR_POSE_HEADER);
    out.push('\n');
    for (t, p) in poses {
        let _ = write!(out, "{t},{},{},{}", p.position.x, p.position.y, p.position.z);
        for r in rows_of(&p.rotation).iter().flatten() {
            let _ = write!(out, ",{r}");
        }
        out.push('\n');
    }
    out
}

pub fn load_results_to_csv(masses: &[f64], results: &[LoadResult]) -> String {
    let mut out = String::new();
    out.push_str(SUSPENSION_HEADER);
    out.push('\n');
    for (i, (m, r)) in masses.iter().zip(results).enumerate() {
        let _ = write!(out, "{i},{m},{},{}", r.position.x, r.position.y);
        for h in r.frame.heights {
            let _ = write!(out, ",{h}");
        }
        for f in r.forces {
            let _ = write!(out, ",{f}");
        }
        out.push('\n');
    }
    out
}

/// Heights in [`Wheel::ALL`] order as a `wheel -> height` listing, for messages.
pub fn describe_heights(heights: &[f64; 4]) -> String {
    Wheel::ALL
        .iter()
        .zip(heights)
        .map(|(w, h)| format!("{}={h:.4}", w.suffix()))
        .collect::<Vec<_>>()
        .join(" ")
}
