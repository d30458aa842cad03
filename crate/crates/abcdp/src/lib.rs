//! Experiment harness for differentially private rejection ABC: JSON
//! configuration, seeded paired benchmarks, result tables and plot data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod plots;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
