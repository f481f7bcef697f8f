//! Experiment driver for `fracspde-core`.
//!
//! JSON configs ([`config`]), CSV and JSON artifacts ([`output`]), the
//! multi-threaded replica driver ([`parallel`]), the built-in verification
//! suites ([`verify`]) and the subcommands behind the `fracspde` binary
//! ([`run`]).
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for an
//! invalid configuration, 3 for a numerical failure or an I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod config;
pub mod output;
pub mod parallel;
pub mod run;
pub mod verify;

use serde::Serialize;

pub use config::{Command, ExperimentConfig, Overrides};
pub use parallel::par_simulate;
pub use run::{execute, Report};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{op} failed: {source}")]
    Numerical {
        op: String,
        source: fracspde_core::Error,
    },
    #[error("{0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } | RunError::Io(_) => 3,
        }
    }
}

/// Attribute a core error to `op`. Domain, truncation and unsupported
/// errors mean the configuration asks for something the numerics cannot
/// deliver, so they are reported as configuration errors.
pub fn numerical(op: &str) -> impl FnOnce(fracspde_core::Error) -> RunError + '_ {
    move |e| match e {
        fracspde_core::Error::Domain(_) | fracspde_core::Error::Unsupported(_) | fracspde_core::Error::Truncation(_) => {
            RunError::Config(format!("{op}: {e}"))
        }
        source => RunError::Numerical {
            op: op.to_string(),
            source,
        },
    }
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(check: impl Into<String>, value: f64, expected: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            check: check.into(),
            value,
            expected,
            tolerance,
            pass,
        }
    }

    /// `|value - expected| ≤ tolerance`.
    pub fn abs(check: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() <= tolerance;
        Self::new(check, value, expected, tolerance, pass)
    }

    /// `|value - expected| ≤ tolerance |expected|`.
    pub fn rel(check: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() <= tolerance * expected.abs();
        Self::new(check, value, expected, tolerance, pass)
    }

    /// `value ≤ tolerance`; `expected` is informational.
    pub fn at_most(check: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(check, value, expected, tolerance, value <= tolerance)
    }
}
