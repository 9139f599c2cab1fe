//! `lapue` command-line driver.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for invalid configuration or arguments.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when a solve stops before reaching its tolerance.
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "lapue", version, about = "Stochastic traffic equilibria with late-arrival penalties")]
pub struct Cli {
    /// Network config file, or `builtin:network1` / `builtin:nguyen-dupuis`.
    #[arg(long, global = true, default_value = "builtin:network1")]
    pub network: String,

    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads for replications and sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Output directory.
    #[arg(long, global = true, env = "LAPUE_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Plain user equilibrium at mean capacities.
    Ue,
    /// Max lateness penalty over sampled capacities.
    Lapue,
    /// Smoothed lateness penalty over sampled capacities.
    Mlapue,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Capacity scenarios per sample average.
    #[arg(long = "samples", default_value_t = 1000)]
    pub samples: usize,

    /// Smoothing parameter; defaults to the config value.
    #[arg(long)]
    pub t: Option<f64>,

    /// Natural-residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one equilibrium and write `result.csv`.
    Solve {
        #[arg(long, value_enum, default_value = "mlapue")]
        mode: Mode,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Distribution-shift experiment; writes `shift_replications.csv` and `shift_summary.csv`.
    Shift {
        /// Replications.
        #[arg(long = "L", default_value_t = 200)]
        l: usize,
        /// Scenarios per replication.
        #[arg(long = "M", default_value_t = 1000)]
        m: usize,
        /// Quantile level where the tail perturbation starts.
        #[arg(long, default_value_t = 0.9)]
        q: f64,
        /// Density of the uniform tail segment.
        #[arg(long, default_value_t = 0.002)]
        beta: f64,
        /// Target arc id.
        #[arg(long, default_value_t = 1)]
        arc: u32,
        /// Replication counts to report, e.g. `20,40,60`; defaults to ten even steps.
        #[arg(long, value_delimiter = ',')]
        l_grid: Vec<usize>,
        /// Points per quantile grid of each capacity law.
        #[arg(long, default_value_t = 1_000_000)]
        grid_points: usize,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Influence of a point-mass capacity outlier; writes `influence.csv`.
    Influence {
        /// Outlier capacity on the target arc; other arcs stay at their sample means.
        #[arg(long = "xi-tilde")]
        xi_tilde: f64,
        #[arg(long, default_value_t = 1)]
        arc: u32,
        /// Contamination mass of the finite-difference check.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Outlier sweep; writes `breakdown.csv`.
    Breakdown {
        /// Outlier counts as `start:stop:step` or a comma list.
        #[arg(long, default_value = "10:100:10")]
        m: String,
        /// Outlier capacity; defaults to six standard deviations below nominal.
        #[arg(long)]
        outlier: Option<f64>,
        #[arg(long, default_value_t = 1)]
        arc: u32,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Smoothing continuation towards the max penalty; writes `continuation.csv`.
    Continuation {
        /// Strictly descending smoothing parameters.
        #[arg(long = "t", value_delimiter = ',', default_value = "1,0.5,0.1,0.01")]
        t_list: Vec<f64>,
        #[arg(long = "samples", default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
    },
    /// Check a config and, optionally, a result file against it.
    Validate {
        /// Result CSV to parse and check.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
