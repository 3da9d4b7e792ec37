//! `panm`: simulate pilot measurements, estimate channels and run the
//! Monte Carlo studies from the command line.
//!
//! Exit codes: 0 success, 2 invalid input (flags, scenario, CSV), 3 solver
//! or I/O failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "panm",
    version,
    about = "Off-grid OFDM channel estimation under impulsive noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a channel and noise, write the pilot measurements
    Simulate(SimArgs),
    /// Estimate the channel for a scenario or a measurement CSV
    Estimate(EstimateArgs),
    /// Success-rate grid over (s, r)
    Phase(PhaseArgs),
    /// Channel error versus SNR for one or more estimators
    Sweep(SweepArgs),
    /// Re-render figures from CSV written by `phase` or `sweep`
    Plot(PlotArgs),
}

/// Flags shared by every experiment-style command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Pilot count
    #[arg(long = "P", default_value_t = 64)]
    pub pilots: usize,
    /// Subcarrier count
    #[arg(long = "N", default_value_t = 512)]
    pub subcarriers: usize,
    /// Sampling period in seconds
    #[arg(long = "Ts", default_value_t = 5e-6)]
    pub ts: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RMS impulse amplitude
    #[arg(long, default_value_t = panm::model::DEFAULT_IMPULSE_SCALE)]
    pub impulse_scale: f64,
    /// Residual radius as a multiple of sigma sqrt(P)
    #[arg(long, default_value_t = panm::estimator::DEFAULT_NOISE_BALL)]
    pub noise_ball: f64,
    /// Baseline grid size (defaults to 4 P)
    #[arg(long = "grid-size")]
    pub grid_size: Option<usize>,
    /// Solver tolerance
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    /// Scenario TOML; replaces the model flags below when given
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Estimate from this `index,re,im` CSV instead of simulating
    #[arg(long)]
    pub measurement: Option<PathBuf>,
    /// panm or plm
    #[arg(long, default_value = "panm")]
    pub estimator: String,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 0)]
    pub smin: usize,
    #[arg(long, default_value_t = 20)]
    pub smax: usize,
    #[arg(long, default_value_t = 0)]
    pub rmin: usize,
    #[arg(long, default_value_t = 20)]
    pub rmax: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 30.0)]
    pub snr: f64,
    /// Run trials on the calling thread only
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 6)]
    pub s: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    /// Comma-separated SNR list in dB
    #[arg(long, default_value = "10,20,30", value_delimiter = ',')]
    pub snr: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Comma-separated estimator list
    #[arg(long, default_value = "panm,plm", value_delimiter = ',')]
    pub estimator: Vec<String>,
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Phase-grid CSV (`s,r,successes,trials`)
    #[arg(long)]
    pub phase: Option<PathBuf>,
    /// Sweep CSV (`estimator,snr_db,mean_mse,stderr,trials`)
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    if let Err(e) = panm::par::configure_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Estimate(a) => commands::estimate(&a, &flags),
        Command::Phase(a) => commands::phase(&a, &flags),
        Command::Sweep(a) => commands::sweep(&a, &flags),
        Command::Plot(a) => commands::plot(&a, &flags),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
