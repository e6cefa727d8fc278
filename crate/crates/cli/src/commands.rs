use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use vehodo::estimate::{
    estimate as run_estimate, frame_times, mean_suspension_frame, sensor_poses, EstimatorConfig, Model,
};
use vehodo::io::{self, ReferencePlaneFile};
use vehodo::metrics::{evaluate as run_evaluate, Denominator, REPORT_HEADER};
use vehodo::planar::{HeadingRule, IntegrationConfig};
use vehodo::signal::standstill_intervals;
use vehodo::simulator::scenarios::Scenario;
use vehodo::simulator::{simulate as run_simulation, simulate_load};
use vehodo::{Geometry, Micros, SignalLog, Trajectory};

use crate::{CalibrateArgs, EstimateArgs, EvaluateArgs, ModelArgs, ReportArgs, SimulateArgs};

/// Bad invocation or malformed configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::error::Error for UsageError {}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_geometry(path: Option<&Path>) -> Result<Geometry> {
    match path {
        Some(p) => {
            let text = read(p)?;
            io::geometry_from_json(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
        None => Ok(Geometry::passenger_car()),
    }
}

fn load_log(path: &Path) -> Result<SignalLog> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    SignalLog::read_csv(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    io::parse_trajectory_csv(&read(path)?).with_context(|| format!("reading {}", path.display()))
}

fn ms_to_us(ms: f64, what: &str) -> Result<Micros> {
    if !(ms.is_finite() && ms > 0.0) {
        return Err(usage(format!("{what} must be a positive number of milliseconds")));
    }
    Ok((ms * 1000.0).round() as Micros)
}

fn config_for(model: Model, args: &ModelArgs) -> Result<EstimatorConfig> {
    if !(args.slice_us.is_finite() && args.slice_us > 0.0) {
        return Err(usage("--slice-us must be positive"));
    }
    Ok(EstimatorConfig {
        model,
        window_us: ms_to_us(args.window_ms, "--window-ms")?,
        integration: IntegrationConfig {
            slice_us: args.slice_us,
            heading_rule: if args.strict_paper_eq3 {
                HeadingRule::PrintedQuotient
            } else {
                HeadingRule::Trapezoid
            },
        },
        ..EstimatorConfig::default()
    })
}

fn frames_for(log: &SignalLog, args: &ModelArgs, window_us: Micros) -> Result<Vec<Micros>> {
    match &args.frames {
        Some(path) => {
            let text = read(path)?;
            let mut frames = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let t: Micros = line
                    .parse()
                    .map_err(|_| anyhow!("{}: line {}: bad timestamp `{line}`", path.display(), i + 1))?;
                frames.push(t);
            }
            Ok(frames)
        }
        None => Ok(frame_times(log, window_us, ms_to_us(args.frame_period_ms, "--frame-period-ms")?)),
    }
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut scenario = match (&args.scenario, &args.canned) {
        (Some(path), _) => {
            let text = read(path)?;
            serde_json::from_str::<Scenario>(&text)
                .map_err(|e| usage(format!("{}: malformed scenario: {e}", path.display())))?
        }
        (None, Some(name)) => Scenario::canned(name, args.seed.unwrap_or(42)).ok_or_else(|| {
            usage(format!(
                "unknown canned scenario `{name}` (available: {})",
                Scenario::CANNED.join(", ")
            ))
        })?,
        (None, None) => return Err(usage("either --scenario or --canned is required")),
    };
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    match &mut scenario {
        Scenario::Manoeuvre {
            geometry,
            truth_dt_us,
            manoeuvre,
        } => {
            if let Some(seed) = args.seed {
                manoeuvre.seed = seed;
            }
            let sim = run_simulation(manoeuvre, geometry, *truth_dt_us).map_err(|e| usage(e.to_string()))?;
            write(&args.out_dir.join("signals.csv"), &sim.log.to_csv_string())?;
            write(&args.out_dir.join("truth.csv"), &io::trajectory_to_csv(&sim.truth))?;
            write(
                &args.out_dir.join("geometry.json"),
                &serde_json::to_string_pretty(geometry)?,
            )?;
            log::info!(
                "{} samples, {} truth poses, {:.1} m",
                sim.log.total_samples(),
                sim.truth.len(),
                sim.truth.length()
            );
        }
        Scenario::LoadSweep { geometry, loads } => {
            let results = loads
                .iter()
                .map(|l| simulate_load(l, geometry))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(e.to_string()))?;
            let masses: Vec<f64> = loads.iter().map(|l| l.mass).collect();
            write(
                &args.out_dir.join("suspension.csv"),
                &io::load_results_to_csv(&masses, &results),
            )?;
            write(
                &args.out_dir.join("geometry.json"),
                &serde_json::to_string_pretty(geometry)?,
            )?;
        }
    }
    Ok(())
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let model: Model = args.model.parse().map_err(usage)?;
    let geom = load_geometry(args.model_args.geometry.as_deref())?;
    let config = config_for(model, &args.model_args)?;
    let log = load_log(&args.log)?;
    let frames = frames_for(&log, &args.model_args, config.window_us)?;
    let est = run_estimate(&log, &geom, &frames, &config)?;
    if let Some(offset) = est.yaw_offset {
        log::info!(
            "yaw offset {:.6} rad/s from {} samples",
            offset.offset,
            offset.sample_count
        );
    }
    if est.low_confidence_slices > 0 {
        log::warn!(
            "{} slices had a front-wheel radius shorter than the wheelbase",
            est.low_confidence_slices
        );
    }
    emit(args.out.as_deref(), &io::trajectory_to_csv(&est.trajectory))?;
    if let Some(path) = &args.geojson {
        write(path, &io::trajectory_to_geojson(&est.trajectory, model.name()))?;
    }
    if let (Some(ext_path), Some(plane_path)) = (&args.extrinsics, &args.reference_plane) {
        let ext = io::extrinsics_from_json(&read(ext_path)?)
            .map_err(|e| usage(format!("{}: {e}", ext_path.display())))?;
        let reference = ReferencePlaneFile::from_json(&read(plane_path)?)
            .and_then(|f| f.plane())
            .map_err(|e| usage(format!("{}: {e}", plane_path.display())))?;
        let poses = sensor_poses(&log, &est.trajectory, &geom, &ext, &reference)?;
        write(&args.sensor_out, &io::sensor_poses_to_csv(&poses))?;
    }
    Ok(())
}

fn denominator(strict: bool) -> Denominator {
    if strict {
        Denominator::PairwiseDistance
    } else {
        Denominator::ReferenceLength
    }
}

fn aligned(est: &Trajectory, reference: &Trajectory) -> Result<Trajectory> {
    let first = est.first().ok_or_else(|| anyhow!("estimate is empty"))?;
    let start = reference
        .interpolate(first.t)
        .ok_or_else(|| anyhow!("reference is empty"))?;
    Ok(est.rigidly_moved(first, &start))
}

fn report_rows(
    log: &SignalLog,
    geom: &Geometry,
    reference: &Trajectory,
    args: &ModelArgs,
    denom: Denominator,
    trajectory: &str,
) -> Result<String> {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for model in Model::ALL {
        let config = config_for(model, args)?;
        let frames = frames_for(log, args, config.window_us)?;
        let est = run_estimate(log, geom, &frames, &config).with_context(|| format!("model {model}"))?;
        let report = run_evaluate(&aligned(&est.trajectory, reference)?, reference, denom)?;
        out.push_str(&report.csv_row(model.name(), trajectory));
        out.push('\n');
    }
    Ok(out)
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let reference = load_trajectory(&args.reference)?;
    let denom = denominator(args.strict_paper_denominator);
    if args.all_models {
        let log_path = args.log.as_ref().ok_or_else(|| usage("--all-models needs --log"))?;
        let log = load_log(log_path)?;
        let geom = load_geometry(args.model_args.geometry.as_deref())?;
        let rows = report_rows(&log, &geom, &reference, &args.model_args, denom, &args.trajectory)?;
        return emit(args.out.as_deref(), &rows);
    }
    let est_path = args.estimate.as_ref().ok_or_else(|| usage("--estimate is required"))?;
    let mut est = load_trajectory(est_path)?;
    if !args.no_align {
        est = aligned(&est, &reference)?;
    }
    let report = run_evaluate(&est, &reference, denom)?;
    let out = format!("{REPORT_HEADER}\n{}\n", report.csv_row(&args.label, &args.trajectory));
    emit(args.out.as_deref(), &out)
}

pub fn calibrate_suspension(args: CalibrateArgs) -> Result<()> {
    let geom = load_geometry(args.geometry.as_deref())?;
    let log = load_log(&args.log)?;
    let (t0, t1) = match (args.from_ms, args.to_ms) {
        (Some(a), Some(b)) => {
            let (t0, t1) = ((a * 1000.0).round() as Micros, (b * 1000.0).round() as Micros);
            if t1 <= t0 {
                bail!(usage("--to-ms must be after --from-ms"));
            }
            (t0, t1)
        }
        _ => {
            let still = standstill_intervals(&log, 0.0)?;
            let first = still
                .first()
                .ok_or_else(|| anyhow!("log has no standstill; pass --from-ms/--to-ms"))?;
            let last = log.time_range().map_or(first.start, |r| r.1);
            (first.start, first.end.map_or(last, |e| e - 1))
        }
    };
    let frame = mean_suspension_frame(&log, t0, t1)?;
    let file = ReferencePlaneFile::capture(&frame, &geom)?;
    log::info!(
        "reference heights {} from [{t0}, {t1}] us",
        io::describe_heights(&file.heights)
    );
    write(&args.out, &file.to_json())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let denom = denominator(args.strict_paper_denominator);
    let (log, reference, geom, name) = match (&args.log, &args.reference) {
        (Some(log_path), Some(ref_path)) => (
            load_log(log_path)?,
            load_trajectory(ref_path)?,
            load_geometry(args.model_args.geometry.as_deref())?,
            log_path
                .file_stem()
                .map_or("log".to_string(), |s| s.to_string_lossy().into_owned()),
        ),
        _ => {
            let scenario = Scenario::canned(&args.canned, args.seed)
                .ok_or_else(|| usage(format!("unknown canned scenario `{}`", args.canned)))?;
            let Scenario::Manoeuvre {
                geometry,
                truth_dt_us,
                manoeuvre,
            } = scenario
            else {
                return Err(usage(format!("`{}` is not a driving scenario", args.canned)));
            };
            let sim = run_simulation(&manoeuvre, &geometry, truth_dt_us)?;
            (sim.log, sim.truth, geometry, args.canned.clone())
        }
    };
    let rows = report_rows(&log, &geom, &reference, &args.model_args, denom, &name)?;
    print!("{rows}");
    Ok(())
}
