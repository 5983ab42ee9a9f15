//! Drivers behind the `evolvs` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::path::PathBuf;

pub use commands::{
    cmd_convergence, cmd_maxreg, cmd_mesh_info, cmd_pullback_check, cmd_run, convergence_with, maxreg_csv,
    pullback_csv, ConvergenceOutcome, RunSummary,
};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key `{key}` = {value:?}: {msg}")]
    Config { key: String, value: String, msg: String },
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] evolvs_core::Error),
    #[error("{0}")]
    Usage(String),
}
