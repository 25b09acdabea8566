//! Command-line front end: scenario sweeps, contour fitting, simulated
//! experiments, condition reports and head-angle prediction.

// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod formats;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wlr_core::threshold::AxisLimits;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "wlr", version, about = "Render-camera displacement errors and detection thresholds")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Search limits `LX,LZ` in millimetres (default 15,15).
    #[arg(long, global = true, value_parser = parse_limits)]
    pub limits: Option<AxisLimits>,
}

impl Common {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            out: out.into(),
            seed: 0,
            limits: None,
        }
    }

    pub fn limits(&self) -> AxisLimits {
        self.limits.unwrap_or_else(AxisLimits::ar)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a scene through a head rotation and tabulate per-point errors.
    Simulate(commands::simulate::SimulateArgs),
    /// Fit threshold contours to a trials CSV.
    Fit(commands::fit::FitArgs),
    /// Run a seeded adaptive experiment against a simulated observer.
    Experiment(commands::experiment::ExperimentArgs),
    /// Compare contour areas between two conditions.
    Report(commands::report::ReportArgs),
    /// Forward-predict head angle from an encoder CSV.
    Predict(commands::predict::PredictArgs),
}

pub fn parse_limits(s: &str) -> std::result::Result<AxisLimits, String> {
    let (x, z) = s.split_once(',').ok_or_else(|| format!("expected `LX,LZ`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
    AxisLimits::new(num(x)?, num(z)?).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(&args, &cli.common).map(drop),
        Command::Fit(args) => commands::fit::run(&args, &cli.common).map(drop),
        Command::Experiment(args) => commands::experiment::run(&args, &cli.common).map(drop),
        Command::Report(args) => commands::report::run(&args, &cli.common).map(drop),
        Command::Predict(args) => commands::predict::run(&args, &cli.common).map(drop),
    }
}
