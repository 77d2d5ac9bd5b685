//! `sdde`: batch front end for delayed jump-model simulation and pricing.
//!
//! Exit codes: 0 success, 2 configuration error, 3 model validation
//! failure, 4 precondition violation, 5 numerical failure.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 2, message }
    }
    pub fn validation(message: String) -> Self {
        CliError { code: 3, message }
    }
    pub fn precondition(message: String) -> Self {
        CliError { code: 4, message }
    }
    pub fn numerical(message: String) -> Self {
        CliError { code: 5, message }
    }
}

impl From<sdde_core::Error> for CliError {
    fn from(e: sdde_core::Error) -> Self {
        use sdde_core::Error::*;
        let code = match &e {
            InvalidInput(_) => 2,
            Validation(_) => 3,
            Range { .. } | History(_) | DegenerateMarket(_) => 4,
            Domain(_) | Positivity { .. } | Quadrature(_) | Fit(_) => 5,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sdde",
    version,
    about = "Simulation, convergence studies and option pricing for delayed jump models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write them as CSV.
    Simulate(RunArgs),
    /// Price a European call (mc | fourier | bs | bs_mc).
    Price(RunArgs),
    /// Emit the benchmark comparison table.
    Table(RunArgs),
    /// Run a coupled strong-convergence study.
    Converge(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool; must not change any result.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &RunArgs, f: impl Fn(&commands::Ctx) -> Result<(), CliError>) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1".into()));
        }
        rayon_pool(n)?;
    }
    let bytes = std::fs::read(&args.config).map_err(|e| {
        CliError::config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let config = RunConfig::parse(&bytes)?;
    let ctx = commands::Ctx {
        config: &config,
        config_hash: config::config_hash(&bytes),
        out_dir: &args.out,
        seed_override: args.seed,
    };
    f(&ctx)
}

fn rayon_pool(threads: usize) -> Result<(), CliError> {
    sdde_core::build_thread_pool(threads).map_err(|e| CliError::config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run(a, commands::cmd_simulate),
        Command::Price(a) => run(a, commands::cmd_price),
        Command::Table(a) => run(a, commands::cmd_table),
        Command::Converge(a) => run(a, commands::cmd_converge),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
