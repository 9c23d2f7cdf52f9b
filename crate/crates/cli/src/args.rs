use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "shepwm",
    version,
    about = "Selective harmonic elimination PWM: switching angles, spectra and gate schedules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Solve for switching angles at one modulation index.
    Solve(SolveArgs),
    /// Solve over a modulation-index grid starting at 0.
    Sweep(SweepArgs),
    /// Harmonic spectrum and THD of a set of switching angles.
    Spectrum(SpectrumArgs),
    /// Sampled output voltage over one period.
    Waveform(WaveformArgs),
    /// Gate-drive schedule for the four bridge switches.
    Gates(GatesArgs),
    /// Re-run a command from a saved run manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

/// Newton iteration settings shared by every solving command.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Harmonic ranks to eliminate (default: 3, 5, …, 2p-1).
    #[arg(long, value_delimiter = ',')]
    pub eliminate: Option<Vec<u32>>,

    /// Convergence threshold on max |dθ|, radians.
    #[arg(long = "tol", env = "SHEPWM_TOL", default_value_t = 1e-15)]
    pub tolerance: f64,

    #[arg(long = "max-iter", default_value_t = 100)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    /// Number of switching angles per quarter period.
    #[arg(short = 'p', long = "angles-count")]
    pub p: usize,

    /// Modulation index M = h1 / V.
    #[arg(short = 'm', long = "modulation")]
    pub modulation: f64,

    /// Initial guess in degrees, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub guess: Option<Vec<f64>>,

    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,

    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,

    /// Write a run manifest to this path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Fresh initial guess at every grid point.
    Paper,
    /// Seed each point with the previous solution.
    Warm,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(short = 'p', long = "angles-count")]
    pub p: usize,

    #[arg(long = "m-max")]
    pub m_max: f64,

    #[arg(long, default_value_t = 0.01)]
    pub step: f64,

    #[arg(long, value_enum, default_value_t = Strategy::Paper)]
    pub strategy: Strategy,

    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,

    /// CSV output path (stdout when omitted).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    /// SVG plot of the angle trajectories.
    #[arg(long)]
    pub svg: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Switching angles given directly or solved from `-p`/`-m`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AngleSource {
    /// Switching angles in degrees, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["p", "modulation"])]
    pub angles: Option<Vec<f64>>,

    #[arg(short = 'p', long = "angles-count", requires = "modulation")]
    pub p: Option<usize>,

    #[arg(short = 'm', long = "modulation", requires = "p")]
    pub modulation: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    pub guess: Option<Vec<f64>>,

    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: AngleSource,

    #[arg(long = "n-max", default_value_t = 49)]
    pub n_max: u32,

    #[arg(long = "dc-voltage", default_value_t = 1.0)]
    pub dc_voltage: f64,

    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    /// SVG bar chart of harmonic amplitudes.
    #[arg(long)]
    pub svg: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct WaveformArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: AngleSource,

    #[arg(long = "dc-voltage", default_value_t = 1.0)]
    pub dc_voltage: f64,

    /// Fundamental frequency, Hz.
    #[arg(long, default_value_t = 50.0)]
    pub frequency: f64,

    #[arg(long, default_value_t = 1 << 16)]
    pub samples: usize,

    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateFormat {
    /// `time_s,s1,s2,s3,s4` event rows.
    Csv,
    /// C header with tick and mask tables.
    C,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GatesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: AngleSource,

    #[arg(long, default_value_t = 50.0)]
    pub frequency: f64,

    /// Dead time in seconds.
    #[arg(long = "dead-time", default_value_t = 1e-6)]
    pub dead_time: f64,

    #[arg(long, value_enum, default_value_t = GateFormat::Csv)]
    pub format: GateFormat,

    /// Timer tick frequency for the C table, Hz.
    #[arg(long, default_value_t = 16e6)]
    pub tick: f64,

    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
