//! `fedloc`: data generation, pretraining, federated runs, experiment suites
//! and plot-ready reports.

mod args;
mod commands;
mod manifest;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration: exit 1.
    Config(anyhow::Error),
    /// Anything that goes wrong after the configuration was accepted: exit 2.
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.global.verbosity())
        .format_timestamp(None)
        .init();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
