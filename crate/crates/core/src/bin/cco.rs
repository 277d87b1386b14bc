//! Command line driver for coverage-and-capacity optimization experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cco_core::experiment::{execute, prepare, summarize_dir, validate_neighborhoods_for};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cco",
    version,
    about = "Cellular coverage and capacity optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel (algorithm, seed) workers; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute aggregate tables from a completed run directory.
    Summarize { dir: PathBuf },
    /// Probe how well the per-UE neighborhoods capture the dominant
    /// interfering cells under random configurations.
    ValidateNeighborhoods { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn dispatch(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
        } => {
            let prepared = prepare(&config, out.as_deref()).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let summary = execute(&prepared, workers).map_err(|e| {
                eprintln!("run error: {e}");
                EXIT_RUNTIME
            })?;
            print!("{}", summary.render_table());
            println!("artifacts written to {}", prepared.out_dir.display());
            Ok(())
        }
        Command::Summarize { dir } => {
            let summary = summarize_dir(&dir).map_err(|e| {
                eprintln!("summarize error: {e}");
                EXIT_RUNTIME
            })?;
            print!("{}", summary.render_table());
            Ok(())
        }
        Command::ValidateNeighborhoods { config } => {
            let prepared = prepare(&config, None).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let report = validate_neighborhoods_for(&prepared).map_err(|e| {
                eprintln!("validation error: {e}");
                EXIT_RUNTIME
            })?;
            println!(
                "capture of the top {} interferers over {} random probes (gamma = {}):",
                report.top_k, report.n_probes, report.gamma
            );
            for (n, rate) in report.per_ue.iter().enumerate() {
                println!("  ue {n:>3}: {rate:.3}");
            }
            println!("mean capture: {:.4}", report.mean);
            Ok(())
        }
    }
}
