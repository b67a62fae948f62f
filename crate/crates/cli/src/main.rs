//! `filterlab`: simulate, filter, verify and counterexample runs driven by a
//! JSON scenario file.

mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Invocation;
use exit::CliError;

#[derive(Parser)]
#[command(
    name = "filterlab",
    version,
    about = "Continuous-time nonlinear filtering lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate signal/observation paths.
    Simulate(Common),
    /// Run the particle filter on a simulated observation path.
    Filter(Common),
    /// Run verification checks and write verdict records.
    Verify(Common),
    /// Simulate one of the counterexample scenarios.
    Counterexample(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

type CommandFn = fn(&Invocation) -> Result<PathBuf, CliError>;

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Filter(c) => (c, commands::filter),
        Command::Verify(c) => (c, commands::verify),
        Command::Counterexample(c) => (c, commands::counterexample),
    };
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Config("--workers: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    let text = commands::read_config(&common.config)?;
    let inv = Invocation::new(&text, common.seed, common.out.clone())?;
    cmd(&inv)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("filterlab: {e}");
            e.exit_code()
        }
    }
}
