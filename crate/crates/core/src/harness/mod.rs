//! Config-driven experiment harness: sweep execution, synthetic-data
//! emission, and report generation over completed runs.

mod config;
mod report;
mod runner;

pub use config::ExperimentConfig;
pub use report::{aggregate, build_report, cell_directory, load_summaries, Report, ReportRow};
pub use runner::{build_dataset, generate_data_files, run_experiment, CellSummary};
