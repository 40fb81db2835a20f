//! Experiment harness around `drkf-core`: configuration files, Monte Carlo
//! simulation, frequency-response and worst-case reports, benchmarks and
//! the file formats used by the `drkf` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod export;
pub mod filters;
pub mod report;
pub mod sim;

pub use error::{HarnessError, Result};
