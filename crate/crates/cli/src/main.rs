//! `quench` — command-line front end for the slicing toolkit.
//!
//! Commands: `gen`, `ga`, `slice`, `freezeout`, `qfp`, `qubit-qfp`.
//! Every command accepts a flat key=value `--config` file whose keys
//! mirror the long flag names; explicit flags win. All outputs are
//! deterministic for a fixed seed.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{GridSpec, IdList, RangeSpec, TopologySpec};

/// Exit code 2: the inputs were rejected. Exit code 3: the run itself
/// failed (I/O, sampling).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<quench_core::Error> for CliError {
    fn from(e: quench_core::Error) -> Self {
        match e {
            quench_core::Error::Io(io) => CliError::Runtime(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "quench",
    about = "Slice anneal schedules, evolve instances, and estimate freezeout points",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random problem instance over a Chimera topology.
    Gen(GenArgs),
    /// Evolve an instance with the genetic algorithm (optionally the
    /// Maximum Clique variant).
    Ga(GaArgs),
    /// Run a slicing experiment and write the trace and plots.
    Slice(SliceArgs),
    /// Estimate the freezeout point via the effective inverse
    /// temperature across a grid of rescale factors.
    Freezeout(FreezeoutArgs),
    /// Fit the three-phase polyline to a trace and report the
    /// quasi-freezeout point.
    Qfp(QfpArgs),
    /// Per-qubit quasi-freezeout points and histogram from per-slice
    /// best readouts.
    QubitQfp(QubitQfpArgs),
}

#[derive(Args)]
struct GenArgs {
    /// key=value config file; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chimera shape MxNxK
    #[arg(long)]
    topology: Option<TopologySpec>,
    /// Dead node ids, comma separated
    #[arg(long)]
    dead: Option<IdList>,
    /// ising | qubo
    #[arg(long)]
    domain: Option<String>,
    /// Open interval for linear coefficients, "lo,hi"
    #[arg(long, allow_hyphen_values = true)]
    linear_range: Option<RangeSpec>,
    /// Open interval for quadratic coefficients, "lo,hi"
    #[arg(long, allow_hyphen_values = true)]
    quad_range: Option<RangeSpec>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evolve Maximum Clique graphs instead of raw coefficients
    #[arg(long)]
    maxclique: bool,
    /// Vertex count for the Maximum Clique variant
    #[arg(long)]
    vertices: Option<usize>,
    /// Chimera shape MxNxK (coefficient variant)
    #[arg(long)]
    topology: Option<TopologySpec>,
    /// ising | qubo (coefficient variant)
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    p_cross: Option<f64>,
    #[arg(long)]
    p_mut: Option<f64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    linear_range: Option<RangeSpec>,
    #[arg(long, allow_hyphen_values = true)]
    quad_range: Option<RangeSpec>,
    #[arg(long)]
    reads: Option<u64>,
    #[arg(long)]
    t_short: Option<f64>,
    #[arg(long)]
    t_long: Option<f64>,
    /// svmc | thermal | boltzmann
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    sweeps_per_us: Option<u32>,
    /// Physical temperature in kelvin
    #[arg(long)]
    temperature: Option<f64>,
    /// Energy curves CSV (defaults to the built-in table)
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file (model text format)
    #[arg(long)]
    model: PathBuf,
    /// Active anneal time T in microseconds
    #[arg(long)]
    total_time: Option<f64>,
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    reads: Option<u64>,
    /// Insert a pause at this time (requires --pause-len)
    #[arg(long)]
    pause_start: Option<f64>,
    #[arg(long)]
    pause_len: Option<f64>,
    /// Embedding file; enables chain-break statistics
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Chimera shape of the embedding's topology, MxNxK
    #[arg(long)]
    embedding_topology: Option<TopologySpec>,
    /// Fraction defining the best tail (default 0.01)
    #[arg(long)]
    best_fraction: Option<f64>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    sweeps_per_us: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FreezeoutArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reads: Option<u64>,
    /// Rescale grid "lo:hi:n" or comma list (default 0.6:0.95:8)
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Anneal time for the sampling runs
    #[arg(long)]
    total_time: Option<f64>,
    /// Override the bin count K (default ceil(sqrt(2R)))
    #[arg(long)]
    bins: Option<usize>,
    /// Minimum r-squared for a valid fit (default 0.5)
    #[arg(long)]
    r2_min: Option<f64>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    sweeps_per_us: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QfpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV produced by `slice`
    #[arg(long)]
    trace: PathBuf,
    /// Frozen threshold on the Phase-3 slope, degrees (default 10)
    #[arg(long)]
    threshold: Option<f64>,
    /// Maximum polyline segments (default 5)
    #[arg(long)]
    max_segments: Option<usize>,
    /// Fit the mean energy column instead of the best-1% column
    #[arg(long)]
    use_mean: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QubitQfpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-slice best readout CSV (`slice,bitstring`) from `slice`
    #[arg(long)]
    bits: PathBuf,
    /// Histogram bin count (default min(slices, 50))
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Ga(args) => commands::ga(args),
        Command::Slice(args) => commands::slice(args),
        Command::Freezeout(args) => commands::freezeout(args),
        Command::Qfp(args) => commands::qfp(args),
        Command::QubitQfp(args) => commands::qubit_qfp(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: validation: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: runtime: {}", msg.replace('\n', " "));
            ExitCode::from(3)
        }
    }
}
