use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod scenario;

use scenario::{ConfigError, ScenarioArgs};

/// Coarse-grid Lax-Friedrichs experiments with Hermite densification.
#[derive(Debug, Parser)]
#[command(name = "coarseflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the LF scheme and write every stored level to solution.csv
    Simulate(ScenarioArgs),
    /// Trace pathlines in a duct flow and densify them into trajectories.csv
    Densify(ScenarioArgs),
    /// Compare coarse+interpolation against the fine solution; writes report.json and errors.csv
    Compare(ScenarioArgs),
    /// Time the G p and C R products and the two-method race; writes bench.csv
    Bench(ScenarioArgs),
    /// Flop and memory model of fine and coarse grids; writes model.json
    Model(ScenarioArgs),
}

const EXIT_FAILURE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_BLOW_UP: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_DOMAIN;
    }
    match err.downcast_ref::<coarseflow::Error>() {
        Some(e) if e.is_domain_like() => EXIT_DOMAIN,
        Some(e) if e.is_blow_up() => EXIT_BLOW_UP,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => a.resolve().and_then(commands::simulate),
        Command::Densify(a) => a.resolve().and_then(commands::densify),
        Command::Compare(a) => a.resolve().and_then(commands::compare),
        Command::Bench(a) => a.resolve().and_then(commands::bench),
        Command::Model(a) => a.resolve().and_then(commands::model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
