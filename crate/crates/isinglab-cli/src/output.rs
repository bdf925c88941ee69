//! Result persistence: a flat CSV of estimates and a self-describing JSON
//! summary.
//!
//! Numbers are written with Rust's shortest round-trip float formatting, so
//! identical results produce identical bytes and the reproducibility claim
//! can be checked with a file compare.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One measured quantity at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: String,
    pub n: i64,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// A power-law fit as persisted.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitOut {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// One derived exponent with the measured value it is compared against,
/// when one was supplied.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalingEntry {
    pub derived: f64,
    pub derived_stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

/// The run's machine-readable record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    /// Experiment kind name.
    pub kind: String,
    /// SHA-256 of the config text, so results are traceable to inputs.
    pub config_sha256: String,
    /// Crate version that produced the run.
    pub code_version: String,
    /// Non-tabular outcomes (search results, resolution statuses).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub statuses: BTreeMap<String, String>,
    /// Power-law fits by quantity name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fits: BTreeMap<String, FitOut>,
    /// Derived exponents by name, present for scaling runs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scaling: BTreeMap<String, ScalingEntry>,
    /// Caveats worth reading (for example low hit counts behind a fit).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(kind: &str, config_text: &str) -> Summary {
        Summary {
            kind: kind.to_string(),
            config_sha256: sha256_hex(config_text),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            statuses: BTreeMap::new(),
            fits: BTreeMap::new(),
            scaling: BTreeMap::new(),
            notes: Vec::new(),
        }
    }
}

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write as _;
        write!(out, "{byte:02x}").expect("writing to a String cannot fail");
    }
    out
}

/// Render the rows as CSV text (header plus one line per row).
pub fn csv_text(rows: &[Row]) -> String {
    let mut out = String::from("quantity,n,mean,stderr,n_samples,seed\n");
    for row in rows {
        use std::fmt::Write as _;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.quantity, row.n, row.mean, row.stderr, row.n_samples, row.seed
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Paths produced by one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// Write `results.csv` and `summary.json` under `dir`, replacing whole
/// files (never appending).
pub fn write_outputs(
    dir: &Path,
    rows: &[Row],
    summary: &Summary,
) -> std::io::Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let results_csv = dir.join("results.csv");
    let summary_json = dir.join("summary.json");
    fs::File::create(&results_csv)?.write_all(csv_text(rows).as_bytes())?;
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    fs::File::create(&summary_json)?.write_all(json.as_bytes())?;
    Ok(OutputFiles { results_csv, summary_json })
}
