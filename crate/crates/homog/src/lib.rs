//! Command-line harness around `homog-core`: JSON configuration, CSV and
//! SVG outputs, and the parallel convergence study.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod study;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use homog_core as core;
