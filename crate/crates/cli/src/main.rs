//! `tcvrp`: synthetic cities, per-depot instances, solving, MIP export and
//! parameter sweeps.
//!
//! Exit codes: 0 success, 1 no feasible solution (infeasible or timed out
//! without an incumbent), 2 bad input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tcvrp::metrics::VehicleType;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tcvrp::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Unsolved(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Unsolved(_) | CliError::Core(tcvrp::Error::Construction { .. }) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "tcvrp", version, about = "Time-constrained vehicle routing for last-mile delivery")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city (network, customers, depots).
    Gen(GenArgs),
    /// Build one instance per depot from a city directory.
    Pipeline(PipelineArgs),
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Write the MIP of an instance in MPS format.
    ExportMps(ExportArgs),
    /// Run parameter sweeps over a city and write a scenario CSV.
    Sweep(SweepArgs),
    /// Summarize solved instances into a scenario CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Vehicle {
    Bev,
    Cv,
}

impl From<Vehicle> for VehicleType {
    fn from(v: Vehicle) -> Self {
        match v {
            Vehicle::Bev => VehicleType::Bev,
            Vehicle::Cv => VehicleType::Cv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
pub enum Solver {
    /// Exact up to 60 super-locations, ITS above.
    Auto,
    Exact,
    Its,
}

#[derive(Args)]
pub struct GenArgs {
    /// City config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub households: Option<usize>,
    #[arg(long)]
    pub extent_mi: Option<f64>,
    #[arg(long)]
    pub block_mi: Option<f64>,
    #[arg(long)]
    pub ordering_rate: Option<f64>,
    #[arg(long)]
    pub depots_per_provider: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Route limits. Unset values fall back to the baseline.
#[derive(Args)]
pub struct LimitArgs {
    /// Vehicle capacity, packages.
    #[arg(long)]
    pub q: Option<u32>,
    /// Route duration limit, hours.
    #[arg(long)]
    pub tbar_h: Option<f64>,
    /// Dwell minutes per customer.
    #[arg(long)]
    pub p_min: Option<f64>,
    /// BEV range, miles.
    #[arg(long)]
    pub dbar_mi: Option<f64>,
    #[arg(long, value_enum)]
    pub vehicle: Option<Vehicle>,
}

#[derive(Args)]
pub struct PipelineArgs {
    /// City directory written by `gen`.
    #[arg(long)]
    pub city: PathBuf,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Defaults to the city seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shared_economy: bool,
    /// Output directory for instance files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: Solver,
    /// Exact: search limit (default 300). ITS: budget per run (default 60).
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    /// ITS runs; the best is kept.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Defaults to the instance seed, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Solution JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub city: PathBuf,
    /// Sweep config JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Capacity values; restricts the sweep to the given axes.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub tbar_h: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p_min: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub dbar_mi: Vec<f64>,
    /// Only this vehicle type.
    #[arg(long, value_enum)]
    pub vehicle: Option<Vehicle>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    /// ITS budget per run and exact search limit.
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Defaults to the city seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shared_economy: bool,
    /// CSV path; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Instance files, paired in order with `--solution`.
    #[arg(long, required = true)]
    pub instance: Vec<PathBuf>,
    /// Output of `solve`, or a bare solution JSON.
    #[arg(long, required = true)]
    pub solution: Vec<PathBuf>,
    #[arg(long, default_value = "synthetic")]
    pub city: String,
    /// Dwell minutes the instances were built with.
    #[arg(long)]
    pub p_min: Option<f64>,
    /// Defaults to bev when the instances carry a range limit.
    #[arg(long, value_enum)]
    pub vehicle: Option<Vehicle>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Gen(a) => commands::gen(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Solve(a) => commands::solve(a),
        Command::ExportMps(a) => commands::export_mps(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report(a) => commands::report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Unsolved("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(tcvrp::Error::Construction { node: 3 }).exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(tcvrp::Error::InvalidInput("x".into())).exit_code(), 2);
    }
}
