//! Batch runner for the heattrace laboratory: TOML run configurations,
//! the five commands, the `κ` dichotomy sweep and versioned outputs.

// Guards are written as `!(x > a)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dichotomy;
pub mod output;

pub use commands::{kernel_check, run, KernelCheckReport, RunSummary};
pub use config::{Command, RunConfig};
pub use dichotomy::{dichotomy_sweep, DichotomyResult, SweepControls};
