//! Configuration, presets, seeded runs and output files for the
//! `guided-crn` command-line tool.

pub mod config;
pub mod export;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, GuideKind};
pub use run::{run_forward, run_greedy, run_guided, run_pmf, run_tune, RunSummary};
