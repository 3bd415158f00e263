//! `mplab`: sweeps, margin manifests, pruning plans, attack schedules and
//! single training runs for margin-based data pruning experiments.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! run fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use mplab_core::pruning::Strategy;
use mplab_core::rational::parse_real;

#[derive(Debug, Parser)]
#[command(name = "mplab", version, about = "Margin-based data pruning experiments")]
pub struct Cli {
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (default: config output.dir, then $MPLAB_OUT_DIR,
    /// then the working directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Deepfool,
    Fast,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Corr,
    Clean,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Teacher,
    Toy,
}

fn real(text: &str) -> Result<f64, String> {
    parse_real(text).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs a grid sweep and writes sweep.csv.
    Sweep { config: PathBuf },
    /// Trains one model, optionally pruned and with a per-sample schedule.
    Train {
        config: PathBuf,
        /// Overrides attack.epsilon.
        #[arg(long, value_parser = real)]
        eps: Option<f64>,
        /// Overrides pruning.gap.
        #[arg(long, value_parser = real)]
        gap: Option<f64>,
        /// Overrides pruning.m_p.
        #[arg(long, value_parser = real)]
        mp: Option<f64>,
    },
    /// Writes a margin manifest for every sample of a dataset.
    Margin {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Attack radius of the online method.
        #[arg(long, value_parser = real)]
        eps: Option<f64>,
        /// BIM step of the fast method.
        #[arg(long, value_parser = real, default_value = "0.001")]
        step: f64,
        #[arg(long, default_value_t = 1000)]
        i_max: usize,
        /// Bisection steps of the fast and online methods.
        #[arg(long, default_value_t = 20)]
        j_max: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, value_parser = real, default_value = "0.02")]
        overshoot: f64,
        /// Iterations of the online method's attack (step eps/4).
        #[arg(long, default_value_t = 10)]
        attack_steps: usize,
    },
    /// Builds a pruning plan from a margin or difficulty manifest.
    Prune {
        manifest: PathBuf,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        #[arg(long)]
        ratio: Option<f64>,
        /// Score threshold (filter-below, pe+filter, or threshold PE/PD).
        #[arg(long, value_parser = real)]
        threshold: Option<f64>,
    },
    /// Clamps margins into per-sample attack radii.
    Schedule {
        manifest: PathBuf,
        #[arg(long, value_parser = real)]
        eps: f64,
        #[arg(long, value_parser = real, default_value = "0")]
        gap: f64,
    },
    /// Prints the log-log slope of every curve in a sweep CSV.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "corr")]
        metric: MetricArg,
        #[arg(long, default_value_t = 0.0)]
        alpha_min: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        alpha_max: f64,
    },
    /// Writes a synthetic dataset CSV.
    Generate {
        #[arg(value_enum)]
        kind: DataKind,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
    },
}

fn parse_strategy(text: &str) -> Result<Strategy, String> {
    text.parse().map_err(|e: mplab_core::Error| e.to_string())
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::run(&cli)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => commands::run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("mplab: configuration error: {m}"),
                Failure::Runtime(m) => eprintln!("mplab: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
