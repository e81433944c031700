//! `v2xplace`: place V2X basic services on highway edge servers and
//! evaluate the placement under simulated traffic.
//!
//! Exit codes: 0 on success, 2 when no feasible placement exists, 1 on
//! usage or configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use v2x_placement::SolverKind;

use commands::Outcome;
use config::{ExperimentConfig, Overrides};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "v2xplace", version, about = "V2X basic-service placement and highway delay evaluation")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Global seed, overriding `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Solver, overriding `solver.kind`.
    #[arg(long, global = true, value_name = "exact|rdp|raa|oracle", value_parser = parse_solver)]
    solver: Option<SolverKind>,
    /// Run only the scenario with this name.
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,
    /// Runs per scenario, overriding every scenario's `runs`.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the placement and write placement.json.
    Place,
    /// Simulate every scenario and write samples, summaries and histograms.
    Simulate {
        /// Placement file written by `place`; solved afresh when omitted.
        #[arg(long, value_name = "PATH")]
        placement: Option<PathBuf>,
    },
    /// Solve with every configured strategy and simulate them on the same traffic.
    Compare,
    /// Evaluate one placement across the scenarios' densities.
    Sweep,
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the complete default configuration, or write it to --out.
    Init,
}

fn parse_solver(name: &str) -> Result<SolverKind, String> {
    name.parse()
}

fn load(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: common.seed,
        output_dir: common.out.clone(),
        solver: common.solver,
        scenario: common.scenario.clone(),
        runs: common.runs.map(|r| r as usize),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Config(ConfigCommand::Init) => commands::config_init(cli.common.out.as_deref()),
        Command::Place => commands::place(&load(&cli.common)?),
        Command::Simulate { placement } => commands::simulate(&load(&cli.common)?, placement.as_ref()),
        Command::Compare => commands::compare(&load(&cli.common)?),
        Command::Sweep => commands::sweep(&load(&cli.common)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(EXIT_INFEASIBLE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
