//! `uict`: sampling, estimation, closed forms, PDE solves and the
//! verification suite from the command line.
//!
//! Exit codes: 0 success, 1 numerical or I/O failure, 2 usage error,
//! 3 a reported comparison failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use output::Format;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl From<uict_core::Error> for CliError {
    fn from(e: uict_core::Error) -> Self {
        use uict_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::OutOfRange { .. }
            | E::UnstableGrid(_)
            | E::ZeroInitialLength
            | E::Parse { .. }
            | E::InvalidDistribution(_)
            | E::NotCritical { .. }
            | E::DegenerateOffspring
            | E::EmptySample => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.into()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "uict", version, about = "Uniform infinite causal triangulations: simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample Galton-Watson trees, conditioned on survival by default.
    SampleTree(SampleTreeArgs),
    /// Sample causal triangulations through the tree bijection.
    SampleCt(SampleCtArgs),
    /// Sample one rescaled boundary-length path.
    SamplePath(SamplePathArgs),
    /// Monte Carlo estimate of an exponential moment against its closed form.
    Estimate(EstimateArgs),
    /// Run the numbered verification suite.
    Verify(VerifyArgs),
    /// Evaluate the propagator phi_lambda(l1, l2; tau).
    Green(GreenArgs),
    /// Solve the Feynman-Kac equation on a grid.
    Pde(PdeArgs),
    /// Exponential-moment estimates over a list of scales t.
    Sweep(SweepArgs),
}

/// Options shared by every command.
#[derive(Args, Debug)]
pub struct IoArgs {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON object of settings keyed by flag name; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleTreeArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// `geometric` or a file of `n p(n)` lines.
    #[arg(long)]
    pub offspring: Option<String>,
    /// Height.
    #[arg(long)]
    pub h: Option<usize>,
    /// Number of roots.
    #[arg(long)]
    pub m0: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Plain Galton-Watson trees (single root) instead of conditioned ones.
    #[arg(long)]
    pub unconditioned: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleCtArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub offspring: Option<String>,
    /// Number of slices above slice 0.
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SamplePathArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub offspring: Option<String>,
    /// `chain` (discrete, rescaled by t) or `diffusion` (sampled on the grid j/t).
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub t: Option<u64>,
    /// Initial rescaled length.
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub offspring: Option<String>,
    /// `length`, `area` or `diffusion`.
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Boundary parameter (length and diffusion functionals).
    #[arg(long)]
    pub xi: Option<f64>,
    /// Area parameter (area functional).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// `all` or a comma-separated list of criterion numbers.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GreenArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub l1: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PdeArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub l_max: Option<f64>,
    #[arg(long)]
    pub n_l: Option<usize>,
    #[arg(long)]
    pub n_tau: Option<usize>,
    /// `explicit`, `implicit` or `crank-nicolson`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Keep every stride-th time level in CSV output.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub offspring: Option<String>,
    /// `length` or `area`.
    #[arg(long)]
    pub functional: Option<String>,
    /// Comma-separated scales.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<u64>>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Samples per scale.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k_sigma: Option<f64>,
    /// Report estimates only, without comparing to the closed form.
    #[arg(long)]
    pub no_target: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SampleTree(a) => commands::sample_tree(a),
        Command::SampleCt(a) => commands::sample_ct(a),
        Command::SamplePath(a) => commands::sample_path(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Verify(a) => commands::verify(a),
        Command::Green(a) => commands::green(a),
        Command::Pde(a) => commands::pde(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("uict: some comparisons failed");
            ExitCode::from(3)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("uict: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(e)) => {
            eprintln!("uict: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
