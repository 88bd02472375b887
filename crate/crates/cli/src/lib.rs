//! Experiment orchestration for the conformal-pinn library: one subcommand
//! per experiment, a sectioned TOML config with flag overrides, and CSV/SVG
//! artifacts under a per-run output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::coverage::CoverageOutcome;
pub use commands::forward_bl::ForwardBlOutcome;
pub use commands::forward_logistic::ForwardLogisticOutcome;
pub use commands::inverse::InverseOutcome;
pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use error::{CliError, Result};
