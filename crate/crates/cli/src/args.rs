use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fedloc_core::federation::AggregatorKind;

#[derive(Debug, Parser)]
#[command(name = "fedloc", version, about = "Federated Wi-Fi fingerprint localization workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Increase log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for independent seeds and variants.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl Global {
    pub fn verbosity(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write offline and online fingerprint CSVs for every building and seed.
    GenData(RunArgs),
    /// Pretrain the global model and save one checkpoint per building and seed.
    Pretrain(RunArgs),
    /// Run the configured scenario.
    Run(RunArgs),
    /// Sweep H over 10, 20, ..., 100 with selective aggregation.
    SweepH(RunArgs),
    /// Compare FedAvg, FedSGD, selective aggregation and the frozen model.
    Compare(RunArgs),
    /// Run the five device-skew cases.
    Skew(RunArgs),
    /// Run 6, 12 and 18 clients.
    Scale(RunArgs),
    /// Per-RP error traces of every aggregator under noise injection.
    Noise(RunArgs),
    /// Turn a results directory into plot-ready tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated seeds replacing the configured ones.
    #[arg(long, env = "FEDLOC_SEED", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_aggregator)]
    pub aggregator: Option<AggregatorKind>,
    /// Upload percentage for selective aggregation, in (0, 100].
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Use the literal additive aggregation formula.
    #[arg(long)]
    pub eq10_literal: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by one of the run commands.
    #[arg(long)]
    pub results: PathBuf,
    /// Output directory; defaults to `<results>/report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_aggregator(s: &str) -> Result<AggregatorKind, String> {
    match s {
        "fedavg" | "fedsgd" | "fedhil" => s.parse().map_err(|e| format!("{e}")),
        _ => Err(format!("expected fedavg, fedsgd or fedhil, got `{s}`")),
    }
}
