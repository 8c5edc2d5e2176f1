//! Command-line drivers for the convex network experiments.

pub mod config;
pub mod run;
pub mod toy;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, ExperimentConfig};
use run::RunError;

#[derive(Debug, Parser)]
#[command(name = "cvxnet", version, about = "Convex networks for basket, Bermudan and swing pricing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the noisy one-dimensional toy function.
    FitToy(Common),
    /// Fit a basket price surface and compare it with Monte Carlo.
    PriceBasket(Common),
    /// Train Bermudan exercise rules and report lower bounds.
    PriceBermudan(Common),
    /// Train swing purchase rules and report prices.
    PriceSwing(Common),
    /// Tangent-plane approximation rates and quantization bounds.
    CheckRates(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Architecture name: LM, L2SE, k-SLM or k-SL2SE.
    #[arg(long)]
    pub arch: Option<String>,
}

impl Command {
    fn parts(&self) -> (Experiment, &Common) {
        match self {
            Command::FitToy(c) => (Experiment::Toy, c),
            Command::PriceBasket(c) => (Experiment::Basket, c),
            Command::PriceBermudan(c) => (Experiment::Bermudan, c),
            Command::PriceSwing(c) => (Experiment::Swing, c),
            Command::CheckRates(c) => (Experiment::Rates, c),
        }
    }
}

/// Effective configuration: the file (or defaults) with flag overrides.
pub fn load_config(experiment: Experiment, common: &Common) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            let cfg = ExperimentConfig::parse(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            if cfg.experiment != experiment {
                return Err(RunError::Config(format!(
                    "{}: experiment is '{}' but the subcommand runs '{experiment}'",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(arch) = &common.arch {
        cfg.net.architecture = Some(arch.clone());
        cfg.net.layers = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (experiment, common) = cli.command.parts();
    let outcome = load_config(experiment, common).and_then(|cfg| run::run(&cfg, common.out.clone()));
    match outcome {
        Ok(dir) => {
            eprintln!("reports written to {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("cvxnet: {e}");
            e.exit_code()
        }
    }
}
