//! `lexsim` command-line driver.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SynthArgs;
use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "lexsim", version, about = "Trial-by-trial lexical decision simulation")]
struct Cli {
    /// TOML config file; any flag given on the command line wins.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the endstate mappings and write them with an evaluation report.
    Build(#[command(flatten)] Settings),
    /// Replay trial sequences and write per-subject measure tables.
    Simulate(#[command(flatten)] Settings),
    /// Fit and compare the regression models on simulated measures.
    Compare(#[command(flatten)] Settings),
    /// Re-evaluate previously built mappings.
    Evaluate(#[command(flatten)] Settings),
    /// Generate a synthetic toy dataset.
    Synth {
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        sizes: SynthArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Build(f) => commands::build(&base.overlay(f)),
        Command::Simulate(f) => commands::simulate(&base.overlay(f)),
        Command::Compare(f) => commands::compare(&base.overlay(f)),
        Command::Evaluate(f) => commands::evaluate(&base.overlay(f)),
        Command::Synth { settings, sizes } => commands::synth(&base.overlay(settings), &sizes),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| writeln!(buf, "level={} {}", rec.level().as_str().to_lowercase(), rec.args()))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("event=error message={e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
