mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<spinlz::Error> for CliError {
    fn from(e: spinlz::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spinlz",
    version,
    about = "Landau-Zener sweeps of a spin S in regular plus fast random fields"
)]
pub struct Cli {
    /// Experiment file (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the experiment file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory. Commands that produce a single table print it when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noise-averaged transition probabilities for given γ and θ.
    Analytic {
        #[arg(long)]
        spin: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        theta: f64,
    },
    /// Monte Carlo ensemble for the experiment in --config.
    Simulate,
    /// Spin-1 sweep with x noise only (τ = 0.008) over a grid of noise amplitudes.
    ReproduceFig1 {
        #[arg(long, default_value_t = 200)]
        realizations: u64,
    },
    /// Survival at an adiabatic spin-½ crossing over b_x τ from 1e-3 to 30.
    Adiabatic {
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        #[arg(long, default_value_t = 0.4)]
        amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        sweep_rate: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Exact coefficients of the noise-only transition probabilities.
    Tables {
        /// Single spin; all S up to 4 when omitted.
        #[arg(long)]
        spin: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let opts = commands::Options {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Analytic { spin, gamma, theta } => commands::analytic(&opts, spin, gamma, theta),
        Command::Simulate => commands::simulate(&opts),
        Command::ReproduceFig1 { realizations } => commands::reproduce_sweep(&opts, realizations),
        Command::Adiabatic {
            tau,
            amplitude,
            sweep_rate,
            points,
        } => commands::adiabatic(&opts, tau, amplitude, sweep_rate, points),
        Command::Tables { spin } => commands::tables(&opts, spin),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinlz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
