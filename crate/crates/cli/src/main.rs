//! Command-line front end for the downwash model.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status 1: internal or solver failure.
const EXIT_INTERNAL: u8 = 1;
/// Exit status 2: bad usage, configuration or input.
const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    pub fn internal(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            error: error.into(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "downwash",
    version,
    about = "Quadrotor downwash as a turbulent jet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the mean downwash speed at one point.
    Eval(EvalArgs),
    /// Tabulate the downwash speed over an (s, r) grid.
    Grid(GridArgs),
    /// Fit jet parameters to flight logs.
    Fit(FitArgs),
    /// Simulate a lower drone crossing below a hovering one.
    Simulate(SimulateArgs),
    /// List the reference drones.
    Presets,
}

/// Vehicle, atmosphere and an optional JSON file with the same settings.
/// Flags take precedence over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// JSON settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset name, see `downwash presets`.
    #[arg(long)]
    pub drone: Option<String>,
    /// Takeoff mass, kg.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Propeller diameter, m.
    #[arg(long)]
    pub prop_diameter: Option<f64>,
    /// Distance between opposite motors, m.
    #[arg(long)]
    pub motor_distance: Option<f64>,
    #[arg(long)]
    pub n_props: Option<u32>,
    /// Ambient pressure, Pa.
    #[arg(long)]
    pub pressure: Option<f64>,
    /// Ambient temperature, K.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Distance below the rotor plane, m.
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// Distance from the axis, m.
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Answer near-field queries with the s/l = 2.5 slice.
    #[arg(long)]
    pub clamp_near_field: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `S_MIN,S_MAX,R_MAX` in motor distances.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub extent: Option<Vec<f64>>,
    /// Grid spacing in motor distances.
    #[arg(long, allow_negative_numbers = true)]
    pub resolution: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<GridFormat>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub clamp_near_field: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Flight log CSV files.
    #[arg(long = "log", num_args = 1.., required = true)]
    pub logs: Vec<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Background flow speed in m/s. Estimated from the pre-takeoff window when absent.
    #[arg(long)]
    pub ambient: Option<f64>,
    /// Length of the pre-takeoff window, s.
    #[arg(long)]
    pub ambient_window: Option<f64>,
    /// Grid spacing in motor distances.
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Also run the scenario without compensation.
    #[arg(long)]
    pub compare: bool,
    /// Directory for time series and summary; summary only on stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval(args) => commands::eval(&args),
        Command::Grid(args) => commands::grid(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Presets => commands::presets(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
