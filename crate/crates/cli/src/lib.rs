//! Command-line front end: CSV ingestion, scenario files and report output.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for data
//! errors (unreadable files, bad cells, failed test preconditions).

mod app;
mod error;
pub mod format;
pub mod ingest;
pub mod scenario_file;

pub use app::{calibrate_delta, run, test_table, TestOutput, THREADS_ENV};
pub use error::CliError;
