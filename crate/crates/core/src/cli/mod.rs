//! Command-line orchestration: run configs, manifests and run directories.

pub mod config;
pub mod run;
mod svg;

pub use config::{ExperimentKind, RunConfig, OUT_ENV};
pub use run::{execute, persist, run, RunOutcome};
