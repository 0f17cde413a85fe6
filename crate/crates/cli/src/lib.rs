//! Experiment orchestration behind the `levy-coupling` binary.
//!
//! Each subcommand is a plain function returning a typed outcome, so the
//! binary and the test suites drive exactly the same code.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::fmt;

pub use commands::*;
pub use config::{DriftChoice, ExperimentConfig, Resolved};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Gate = 2,
    Certificate = 3,
    BoundFlag = 4,
    Runtime = 5,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn new(status: Status, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Status::Usage, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<levy_coupling::Error> for CliError {
    fn from(e: levy_coupling::Error) -> Self {
        use levy_coupling::Error as E;
        let status = match e.root() {
            E::GateFailure { .. } => Status::Gate,
            E::Certificate { .. } | E::Quadrature { .. } => Status::Certificate,
            E::EventBudget { .. }
            | E::NonFinite { .. }
            | E::StepUnderflow { .. }
            | E::DegenerateFit(_) => Status::Runtime,
            _ => Status::Usage,
        };
        Self::new(status, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::usage(format!("csv: {e}"))
    }
}
