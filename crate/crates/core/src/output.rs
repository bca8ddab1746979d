//! CSV tables and the JSON run manifest.
//!
//! Files are append-only: an existing non-empty file gets new rows without a
//! second header.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::TailCurve;
use crate::measure::IndependenceReport;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const INDEPENDENCE_CSV: &str = "independence.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub n: usize,
    pub lambda: f64,
    pub policy: String,
    pub dist: String,
    pub busy_frac_mean: f64,
    pub busy_frac_stderr: f64,
    pub wait_prob: f64,
    pub blocked_frac: f64,
    pub sup_dist_to_star: f64,
    pub events_processed: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub scenario_id: String,
    pub kind: String,
    pub w: f64,
    pub value: f64,
    /// Empty for analytic curves.
    pub stderr: Option<f64>,
}

impl CurveRow {
    pub fn from_curve(scenario_id: &str, curve: &TailCurve) -> Vec<CurveRow> {
        let se = curve.stderr();
        curve
            .grid()
            .points()
            .iter()
            .zip(curve.values())
            .enumerate()
            .map(|(k, (&w, &value))| CurveRow {
                scenario_id: scenario_id.to_string(),
                kind: curve.kind().name().to_string(),
                w,
                value,
                stderr: se.map(|s| s[k]),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scenario_id: String,
    pub n: usize,
    pub sup_dist: f64,
    pub wait_prob: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub scenario_id: String,
    pub w1: f64,
    pub w2: f64,
    pub joint: f64,
    pub product: f64,
    pub diff: f64,
}

impl IndependenceRow {
    pub fn from_report(scenario_id: &str, report: &IndependenceReport) -> Vec<IndependenceRow> {
        report
            .rows
            .iter()
            .map(|r| IndependenceRow {
                scenario_id: scenario_id.to_string(),
                w1: r.w1,
                w2: r.w2,
                joint: r.joint,
                product: r.product,
                diff: r.diff,
            })
            .collect()
    }
}

/// Per-run entry of the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub scenario_id: String,
    pub seed: u64,
    pub n: usize,
    pub lambda: f64,
    /// Scenario file contents (TOML) that reproduce the run.
    pub config: String,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub base_config: String,
    pub runs: Vec<ManifestRun>,
    pub failures: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, base_config: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            base_config,
            runs: Vec::new(),
            failures: Vec::new(),
        }
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv { path: path.to_path_buf(), source }
}

/// Appends `rows` to the CSV at `path`, writing the header only when the
/// file is new or empty.
pub fn append_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), OutputError> {
    let io = |source| OutputError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err(path))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|source| OutputError::Json { path: path.to_path_buf(), source })?;
    std::fs::write(path, text + "\n").map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json { path: path.to_path_buf(), source })
}
