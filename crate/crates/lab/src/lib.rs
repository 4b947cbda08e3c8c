//! Experiment harness: configuration, the sweep commands behind the CLI,
//! randomized invariant suites and a CSV spot checker.

pub mod commands;
pub mod config;
pub mod error;
pub mod invariants;
pub mod selftest;
pub mod spotcheck;

pub use config::{ExperimentConfig, Overrides};
pub use error::{LabError, Result};
