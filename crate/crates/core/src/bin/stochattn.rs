//! Thin command-line front end over the pipeline library.
//!
//! Exit codes: 0 success, 2 config validation failure, 3 numerical failure,
//! 4 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stochattn::pipeline::{
    cmd_calibrate, cmd_evaluate, cmd_fit, cmd_report, cmd_sweep_nu, PipelineError, RunConfig,
};

/// Environment variable holding the default worker-thread count.
const THREADS_ENV: &str = "STOCHATTN_THREADS";

#[derive(Parser)]
#[command(
    name = "stochattn",
    about = "Stochastic-attention uncertainty: fit a frozen-encoder regressor, \
             calibrate the concentration parameter, and evaluate predictive ensembles."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir; default "run").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: STOCHATTN_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the dataset, fit the readout, save the model and its accuracy.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Calibrate the concentration parameter on the calibration split.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to the fitted model JSON.
        #[arg(long)]
        model: PathBuf,
    },
    /// Evaluate stochastic attention and the baselines on the test split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: PathBuf,
        /// Concentration parameter to evaluate at (e.g. the calibrated one).
        #[arg(long)]
        nu: u64,
        /// PIT histogram bin count (overrides the config; default 20).
        #[arg(long)]
        pit_bins: Option<usize>,
    },
    /// Evaluate loss and metrics over a list of nu values.
    SweepNu {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated nu values, e.g. 1,4,16,64.
        #[arg(long, value_delimiter = ',', required = true)]
        nus: Vec<u64>,
    },
    /// Rebuild the surrogate landscape from a calibration trace.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Path to calibration_trace.jsonl.
        #[arg(long)]
        trace: PathBuf,
    },
}

fn configure_threads(explicit: Option<usize>) {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = explicit.or(from_env) {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_config(common: &CommonArgs) -> Result<(RunConfig, PathBuf), PipelineError> {
    configure_threads(common.threads);
    let mut config = RunConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        config.sa.master_seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("run"));
    Ok((config, out))
}

fn run() -> Result<(), PipelineError> {
    match Cli::parse().command {
        Command::Fit { common } => {
            let (config, out) = load_config(&common)?;
            let summary = cmd_fit(&config, &out)?;
            println!(
                "fit: model {} | test rmse {:.4} mae {:.4} | splits {}/{}/{}",
                out.join(&summary.model_path).display(),
                summary.test_rmse,
                summary.test_mae,
                summary.n_train,
                summary.n_cal,
                summary.n_test
            );
        }
        Command::Calibrate { common, model } => {
            let (config, out) = load_config(&common)?;
            let summary = cmd_calibrate(&config, &model, &out)?;
            println!(
                "calibrate: nu* = {} after {} iterations (s0 = {:.4}); trace in {}",
                summary.nu_star,
                summary.iterations,
                summary.s0,
                out.join("calibration_trace.jsonl").display()
            );
        }
        Command::Evaluate {
            common,
            model,
            nu,
            pit_bins,
        } => {
            let (mut config, out) = load_config(&common)?;
            if let Some(bins) = pit_bins {
                config.metrics.pit_bins = bins;
            }
            let summary = cmd_evaluate(&config, &model, nu, &out)?;
            println!("evaluate at nu = {nu}:");
            for (method, eval) in &summary.methods {
                println!(
                    "  {method:>14}: native W1 {:.4} | scaled W1 {:.4} (tau {:.3}) | CRPS {:.4}",
                    eval.native_w1, eval.scaled_w1, eval.tau, eval.native_crps
                );
            }
        }
        Command::SweepNu { common, model, nus } => {
            let (config, out) = load_config(&common)?;
            cmd_sweep_nu(&config, &model, &nus, &out)?;
            println!(
                "sweep: {} nu values -> {}",
                nus.len(),
                out.join("sweep_nu.csv").display()
            );
        }
        Command::Report { common, trace } => {
            let (config, out) = load_config(&common)?;
            cmd_report(&config, &trace, &out)?;
            println!(
                "report: surrogate landscape in {}",
                out.join("surrogate_landscape.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
