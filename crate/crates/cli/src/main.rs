use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drmc::exec::Execution;
use drmc_cli::commands;
use drmc_cli::config::ExperimentConfig;
use drmc_cli::CliError;
use serde::Serialize;

/// Delayed rejection MCMC experiments.
#[derive(Debug, Parser)]
#[command(name = "drmc", version)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Run work items one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one chain and write its CSV and summary.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute an AP, CPE or validity map with per-cell caching.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cell cache directory; defaults to `<out>/cache`.
        #[arg(long, env = "DRMC_CACHE")]
        cache: Option<PathBuf>,
    },
    /// Autocorrelation analysis of a chain file.
    Diagnose {
        #[arg(long)]
        chain: PathBuf,
        /// Leading states to drop.
        #[arg(long, default_value_t = 0)]
        discard: usize,
        #[arg(long)]
        max_lag: Option<usize>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the three sampler modes at an equal target-evaluation budget.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut c = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        c.override_seed(s);
    }
    Ok(c)
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Sample { config, seed, out } => {
            let c = load(&config, seed)?;
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            print(&commands::sample(&c, &dir)?);
        }
        Command::Calibrate { config, seed, out, cache } => {
            let c = load(&config, seed)?;
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            let cache = cache.unwrap_or_else(|| dir.join("cache"));
            print(&commands::calibrate(&c, &dir, &cache, exec)?);
        }
        Command::Diagnose { chain, discard, max_lag, out } => {
            let report = commands::diagnose(&chain, discard, max_lag)?;
            if let Some(path) = out {
                drmc_cli::io::write_json(&path, &report)?;
            }
            print(&report);
        }
        Command::Compare { config, seed, out } => {
            let c = load(&config, seed)?;
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            print(&commands::compare(&c, &dir, exec)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
