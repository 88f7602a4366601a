//! Experiment harness for the `infoquant` scores: dataset I/O, synthetic
//! data, and the `train`, `score`, `select`, `correlate` and `simulate`
//! commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod methods;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
