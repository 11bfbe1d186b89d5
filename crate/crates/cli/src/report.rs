//! Report documents and the aggregate CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};

/// Version tag written as the first line of every results CSV.
pub const CSV_SCHEMA: &str = "# jumpreach-mc-csv v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Feasible,
    Infeasible,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Feasible => 0,
            Status::Infeasible => 2,
            Status::VerificationFailed => 3,
        }
    }
}

/// Wall-clock data; the only part of a report that differs between reruns.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub started_unix_secs: u64,
    pub wall_secs: f64,
    /// Per-estimate runtimes, keyed like the CSV rows.
    pub items: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub kind: ExperimentKind,
    pub status: Status,
    /// Fully resolved configuration (defaults filled in, CLI overrides applied).
    pub config: ExperimentConfig,
    pub result: serde_json::Value,
    pub files: Vec<String>,
    pub timing: Timing,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One row of the aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub experiment: String,
    pub n: u64,
    pub k: u64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    pub wall_time: f64,
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<(), csv::Error> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
