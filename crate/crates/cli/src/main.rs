//! `ssdebias` — config-driven experiment runner.
//!
//! Subcommands: `train` (run a sweep), `report` (aggregate finished runs),
//! `gen-data` (emit a synthetic corpus as JSONL). Exit codes: 0 success,
//! 1 usage error (bad flags or bad config), 2 run failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use ssdebias::harness::{build_report, generate_data_files, run_experiment, ExperimentConfig};
use ssdebias::Error;

/// Prints to stdout, exiting quietly when the reader has gone away (for
/// example when output is piped into `head`). `println!` would panic there.
fn emit(args: std::fmt::Arguments) {
    use std::io::Write;
    if std::io::stdout().write_fmt(args).is_err() {
        std::process::exit(0);
    }
}

macro_rules! emit {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

macro_rules! emitln {
    ($($arg:tt)*) => { emit(format_args!("{}\n", format_args!($($arg)*))) };
}

#[derive(Parser)]
#[command(
    name = "ssdebias",
    version,
    about = "Semi-supervised text classification with pseudo-label debiasing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, labels-per-class, seed) cell of a sweep.
    Train {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's seed list (comma-separated).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Cap on concurrently running cells (default: one per CPU).
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Aggregate summaries under a results directory into tables.
    Report {
        /// Directory produced by `train`.
        #[arg(long)]
        results: PathBuf,
    },
    /// Write the config's synthetic corpus as JSONL plus a label manifest.
    GenData {
        /// TOML experiment config (the synthetic_* keys drive generation).
        #[arg(long)]
        config: PathBuf,
        /// Directory for data.jsonl and manifest.json.
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(command: Command) -> ssdebias::Result<()> {
    match command {
        Command::Train {
            config,
            output_dir,
            seeds,
            parallelism,
        } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            if let Some(dir) = output_dir {
                config.output_dir = dir.to_string_lossy().into_owned();
            }
            if let Some(seeds) = seeds {
                if seeds.is_empty() {
                    return Err(Error::Config {
                        key: "seeds".into(),
                        message: "override list is empty".into(),
                    });
                }
                config.seeds = seeds;
            }
            if let Some(n) = parallelism {
                if n == 0 {
                    return Err(Error::Config {
                        key: "parallelism".into(),
                        message: "must be at least 1".into(),
                    });
                }
                // Global pool; setting it twice only happens on repeated
                // flag parsing, which clap prevents.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let summaries = run_experiment(&config)?;
            for s in &summaries {
                let target = match (s.target_accuracy, s.target_macro_f1) {
                    (Some(acc), Some(f1)) => {
                        format!("  target_accuracy {acc:.4}  target_macro_f1 {f1:.4}")
                    }
                    _ => String::new(),
                };
                emitln!(
                    "{} k={} seed={}: accuracy {:.4}  macro_f1 {:.4}{}",
                    s.strategy, s.labels_per_class, s.seed, s.accuracy, s.macro_f1, target
                );
            }
            emitln!(
                "{} runs complete; artifacts under {}",
                summaries.len(),
                config.output_dir
            );
            Ok(())
        }
        Command::Report { results } => {
            let report = build_report(&results)?;
            emit!("{}", report.text);
            emitln!(
                "written: {} and {}",
                results.join("report.txt").display(),
                results.join("report.csv").display()
            );
            Ok(())
        }
        Command::GenData { config, output } => {
            let config = ExperimentConfig::from_file(&config)?;
            let (data, manifest) = generate_data_files(&config, &output)?;
            emitln!("written: {} and {}", data.display(), manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; anything else is usage.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
