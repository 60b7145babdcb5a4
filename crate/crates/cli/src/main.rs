//! `hpv`: command-line driver for Hermite power variation experiments.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::{CliResult, CommonArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hpv", version, about = "Hermite power variations of fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write exact fGn paths, one file per (n, path index)
    Sample(CommonArgs),
    /// Exact supercritical L2 discrepancy sweep with a log-log rate fit
    Discrepancy(CommonArgs),
    /// Monte Carlo Berry-type bound at the critical Hurst index
    Berry(CommonArgs),
    /// Empirical rate scan for any regime
    Rate(CommonArgs),
    /// Per-lag terms of the discrepancy bracket
    BracketTable(CommonArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => commands::cmd_sample(&RunConfig::resolve(&a, 1)?),
        Command::Discrepancy(a) => commands::cmd_discrepancy(&RunConfig::resolve(&a, 1)?),
        Command::Berry(a) => commands::cmd_berry(&RunConfig::resolve(&a, 1000)?),
        Command::Rate(a) => commands::cmd_rate(&RunConfig::resolve(&a, 1000)?),
        Command::BracketTable(a) => commands::cmd_bracket_table(&RunConfig::resolve(&a, 1)?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
