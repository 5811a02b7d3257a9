use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weakkam_cli::config::load_config;
use weakkam_cli::experiment::{run_experiment, RunError};
use weakkam_cli::{init_threads, oracle_suite};

#[derive(Parser)]
#[command(name = "weakkam", version, about = "Vanishing-discount selection on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the tropical oracle cross-checks.
    Oracle {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    init_threads();
    match Cli::parse().command {
        Command::Run { config, out } => {
            let mut cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    let err = RunError::Config(e);
                    eprintln!("error: {err}");
                    return ExitCode::from(err.exit_code() as u8);
                }
            };
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            match run_experiment(&cfg) {
                Ok(outcome) => {
                    for c in &outcome.checks {
                        println!("PASS {}: {}", c.name, c.detail);
                    }
                    println!("C = {:.12}, wrote {}", outcome.selection_constant, outcome.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Oracle { seed } => {
            let results = oracle_suite::run_all(seed);
            for r in &results {
                println!("{}", r.line());
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
