//! `weightlab` command line: run singular-density experiments from JSON
//! configs with reproducible seeds and deterministic artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weightlab::cli::config::ExperimentConfig;
use weightlab::cli::runner;

/// Experiment runner for singular-density averaging studies.
#[derive(Parser)]
#[command(name = "weightlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the JSON config file.
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's sample budget.
        #[arg(long)]
        samples: Option<u64>,
        /// Worker threads for sampling; results are identical for any count.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the config's `out_dir`, else the
        /// current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::EXIT_ERROR as u8)
        }
    }
}

fn dispatch(cli: Cli) -> weightlab::Result<i32> {
    match cli.command {
        Command::Run { config, seed, samples, workers, out } => {
            if let Some(workers) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global()
                    .map_err(|e| {
                        weightlab::Error::InvalidParameter(format!(
                            "cannot configure {workers} worker threads: {e}"
                        ))
                    })?;
            }
            let text = std::fs::read_to_string(&config)
                .map_err(|e| weightlab::Error::Io(format!("{}: {e}", config.display())))?;
            let mut parsed = ExperimentConfig::from_json(&text)?;
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            if let Some(samples) = samples {
                parsed.samples = Some(samples);
            }
            let out_dir = out
                .or_else(|| parsed.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            let artifacts = runner::run(&parsed, &out_dir)?;
            if let Some(verdict) = &artifacts.verdict {
                println!("verdict: {verdict}");
            }
            println!("report: {}", artifacts.report_path.display());
            Ok(artifacts.exit_code)
        }
    }
}
