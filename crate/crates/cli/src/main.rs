//! `hea`: predicted and empirical KRR learning curves, Hermite
//! eigenstructure checks and data generation from a TOML run config.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hea_core::par::Execution;

use crate::commands::MatrixFormat;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "hea", version, about = "Hermite eigenstructure workflow for kernel ridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict the test-risk learning curve from data statistics.
    PredictCurve(Common),
    /// Measure the KRR learning curve by repeated train/test splits.
    EmpiricalCurve(Common),
    /// Compare the empirical kernel eigensystem with the Hermite one.
    CheckHea(Common),
    /// Decompose the target in the Hermite basis.
    DecomposeTarget(Common),
    /// Sweep kernel width or effective dimension and report overlaps.
    FailureModes(Common),
    /// Convergence rate of the Hermite eigensystem for geometric kernels.
    RateProbe(Common),
    /// Write synthetic Gaussian data (and labels if a target is configured).
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "csv")]
        format: MatrixFormat,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set kernel.sigma=4`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Parent directory for run outputs.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Common {
    fn load(&self) -> Result<(RunConfig, Execution), CliError> {
        let mut overrides = self.overrides.clone();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("eigenframework.ridge", self.ridge.map(|v| format!("{v:?}")));
        push("empirical.trials", self.trials.map(|v| v.to_string()));
        push("empirical.test_size", self.test_size.map(|v| v.to_string()));
        let mut cfg = RunConfig::load(&self.config, &overrides)?;
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        let exec = if self.sequential { Execution::Sequential } else { Execution::Parallel };
        Ok((cfg, exec))
    }
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::PredictCurve(c) => c.load().and_then(|(cfg, e)| commands::predict_curve(&cfg, e)),
        Command::EmpiricalCurve(c) => c.load().and_then(|(cfg, e)| commands::empirical_curve(&cfg, e)),
        Command::CheckHea(c) => c.load().and_then(|(cfg, e)| commands::check(&cfg, e)),
        Command::DecomposeTarget(c) => c.load().and_then(|(cfg, e)| commands::decompose(&cfg, e)),
        Command::FailureModes(c) => c.load().and_then(|(cfg, e)| commands::failure_modes(&cfg, e)),
        Command::RateProbe(c) => c.load().and_then(|(cfg, e)| commands::probe(&cfg, e)),
        Command::GenData { common, format } => common.load().and_then(|(cfg, _)| commands::gen_data(&cfg, format)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
