//! Scenario runner for edge-density simulations: `run`, `check`, `sweep` and
//! `demo` subcommands, plus CSV, JSON and SVG export.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod demos;
pub mod error;
pub mod output;
pub mod runner;
pub mod scenario;
pub mod specs;
pub mod svg;

pub use commands::run_cli;
pub use error::CliError;
pub use runner::{run_scenario, sweep, RunOptions, RunSummary, SweepReport};
pub use scenario::Scenario;
