//! Config-driven front end: one TOML file describes one experiment, and a run
//! writes `report.json` plus CSV/JSON exports into an output directory.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, PlannerChoice};
pub use report::{Report, Status, CSV_SCHEMA};
pub use run::{run, RunError, RunOutput};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "JUMPREACH_OUT_DIR";
