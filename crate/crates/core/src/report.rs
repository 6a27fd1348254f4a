//! Tabular experiment reports with CSV and JSON emitters.
//!
//! Reports contain only reproducible content; wall-clock time is kept on the
//! struct but never serialized, so equal (seed, parameters, grid) give
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{KflError, Result};
use crate::grid::CONSTANTS_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub params: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub constants: String,
    pub seed: u64,
    pub grid: String,
    pub caveat: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub summary: BTreeMap<String, f64>,
    pub passed: bool,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub const RANDOM_DATA_CAVEAT: &str =
    "ratios are empirical suprema over seeded Gaussian block data, not worst-case bounds";

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, grid: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            constants: CONSTANTS_VERSION.to_string(),
            seed,
            grid: grid.to_string(),
            caveat: RANDOM_DATA_CAVEAT.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            passed: true,
            wall_clock_secs: 0.0,
        }
    }

    /// Append a row; the ratio is `lhs / rhs`, and 0 when `lhs` is 0.
    pub fn push(&mut self, params: &[f64], lhs: f64, rhs: f64) -> Result<()> {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        if params.len() != self.columns.len() {
            return Err(KflError::ShapeMismatch {
                expected: self.columns.len(),
                got: params.len(),
            });
        }
        if !(lhs.is_finite() && rhs.is_finite() && ratio.is_finite()) || params.iter().any(|p| !p.is_finite()) {
            return Err(KflError::NonFinite {
                experiment: self.experiment.clone(),
                detail: format!("params {params:?}: lhs = {lhs}, rhs = {rhs}"),
            });
        }
        self.rows.push(ReportRow {
            params: params.to_vec(),
            lhs,
            rhs,
            ratio,
        });
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.params[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# experiment={}", self.experiment);
        let _ = writeln!(out, "# constants={}", self.constants);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# grid={}", self.grid);
        let _ = writeln!(out, "# caveat={}", self.caveat);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "# passed={}", self.passed);
        let mut header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        header.extend(["lhs", "rhs", "ratio"]);
        let _ = writeln!(out, "{}", header.join(","));
        for r in &self.rows {
            let mut fields: Vec<String> = r.params.iter().map(|p| p.to_string()).collect();
            fields.extend([r.lhs.to_string(), r.rhs.to_string(), r.ratio.to_string()]);
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.experiment));
        let json = dir.join(format!("{}.json", self.experiment));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json() + "\n")?;
        Ok((csv, json))
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
