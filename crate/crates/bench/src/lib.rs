//! Experiment harness: run directories, plots and paired comparisons.

pub mod cli;
pub mod compare;
pub mod config;
mod error;
pub mod plot;
pub mod run;
pub mod stats;

pub use error::{BenchError, Result};
