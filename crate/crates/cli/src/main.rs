use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Vehicle odometry from wheel-speed, yaw-rate and suspension-height logs.
#[derive(Debug, Parser)]
#[command(name = "vehodo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a signal log and ground truth, or a suspension load sweep.
    Simulate(SimulateArgs),
    /// Estimate a trajectory from a signal log.
    Estimate(EstimateArgs),
    /// Compare an estimated trajectory with a reference.
    Evaluate(EvaluateArgs),
    /// Capture the settled suspension plane from a standstill interval.
    CalibrateSuspension(CalibrateArgs),
    /// Run every model on a log (or a canned scenario) and print the error table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "canned", required_unless_present = "canned")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: figure-of-8 or load-sweep.
    #[arg(long)]
    canned: Option<String>,
    /// Noise seed; overrides the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Vehicle geometry JSON; defaults to a mid-size passenger car.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Quadratic-fit window length.
    #[arg(long, default_value_t = 200.0)]
    window_ms: f64,
    /// Integration slice length.
    #[arg(long, default_value_t = 500.0)]
    slice_us: f64,
    /// Use the printed quotient form of the heading update instead of the trapezoid.
    #[arg(long)]
    strict_paper_eq3: bool,
    /// Frame timestamp file (one microsecond timestamp per line).
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Frame cadence when no frame file is given.
    #[arg(long, default_value_t = 33.0)]
    frame_period_ms: f64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Signal log CSV.
    #[arg(long)]
    log: PathBuf,
    /// proposed, two_track, one_track or yaw_rate.
    #[arg(long, default_value = "proposed")]
    model: String,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Trajectory CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the trajectory as GeoJSON.
    #[arg(long)]
    geojson: Option<PathBuf>,
    /// Sensor extrinsics JSON; enables sensor-pose output.
    #[arg(long, requires = "reference_plane")]
    extrinsics: Option<PathBuf>,
    /// Reference plane JSON from `calibrate-suspension`.
    #[arg(long, requires = "extrinsics")]
    reference_plane: Option<PathBuf>,
    /// Sensor pose CSV output.
    #[arg(long, default_value = "sensor_poses.csv")]
    sensor_out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Estimated trajectory CSV (not needed with --all-models).
    #[arg(long, required_unless_present = "all_models")]
    estimate: Option<PathBuf>,
    /// Reference trajectory CSV.
    #[arg(long)]
    reference: PathBuf,
    /// Divide by the summed pairwise distances instead of the reference length.
    #[arg(long)]
    strict_paper_denominator: bool,
    /// Keep the estimate's own start pose instead of moving it onto the reference.
    #[arg(long)]
    no_align: bool,
    /// Label for the model column.
    #[arg(long, default_value = "estimate")]
    label: String,
    /// Label for the trajectory column.
    #[arg(long, default_value = "trajectory")]
    trajectory: String,
    /// Run every model on --log and emit one row each.
    #[arg(long, requires = "log")]
    all_models: bool,
    /// Signal log CSV for --all-models.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Report CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Interval start; defaults to the first standstill.
    #[arg(long, requires = "to_ms")]
    from_ms: Option<f64>,
    /// Interval end.
    #[arg(long, requires = "from_ms")]
    to_ms: Option<f64>,
    /// Reference plane JSON output.
    #[arg(long, default_value = "reference_plane.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Signal log CSV; a canned scenario is simulated when absent.
    #[arg(long, requires = "reference")]
    log: Option<PathBuf>,
    /// Reference trajectory CSV for --log.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "figure-of-8")]
    canned: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    strict_paper_denominator: bool,
    #[command(flatten)]
    model_args: ModelArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::CalibrateSuspension(args) => commands::calibrate_suspension(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
