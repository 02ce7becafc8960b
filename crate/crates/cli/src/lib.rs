//! Batch front end for the `rankos` tests: CSV in, JSON and CSV out.

pub mod cache;
pub mod commands;
pub mod curves;
pub mod dataset;
pub mod error;

pub use error::{exit, CliError, CliResult};
