//! Thin command-line front end: one verb per analysis surface, everything
//! else lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kinetic_opinions::config::Scenario;
use kinetic_opinions::runner::{self, RunnerError};

#[derive(Parser)]
#[command(
    name = "kinop",
    about = "Kinetic opinion dynamics with variable social activity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the artifact bundle.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver and write the full artifact bundle.
    Simulate(Common),
    /// Classify the polarization/consensus regime and emit density tables.
    Classify(Common),
    /// Analyze the control strategy: fluxes, admissible intervals, verdict.
    Feasibility(Common),
    /// Emit the global equilibrium and the regularity indices.
    Equilibrium(Common),
    /// Cross-validate the Monte Carlo and fp-h solvers on matched data.
    Compare(Common),
}

fn load(common: &Common) -> Result<Scenario, RunnerError> {
    let mut scenario = Scenario::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
        scenario.raw.run.seed = Some(seed);
    }
    Ok(scenario)
}

fn dispatch(cmd: &Command) -> Result<(), RunnerError> {
    match cmd {
        Command::Simulate(c) => {
            let scenario = load(c)?;
            runner::run(&scenario, &c.out, c.quiet)?;
        }
        Command::Classify(c) => {
            let scenario = load(c)?;
            runner::classify(&scenario, &c.out, c.quiet)?;
        }
        Command::Feasibility(c) => {
            let scenario = load(c)?;
            runner::feasibility(&scenario, &c.out, c.quiet)?;
        }
        Command::Equilibrium(c) => {
            let scenario = load(c)?;
            runner::equilibrium(&scenario, &c.out, c.quiet)?;
        }
        Command::Compare(c) => {
            let scenario = load(c)?;
            runner::compare(&scenario, &c.out, c.quiet)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
