//! Residual records, the aggregated report and the files written next to it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::scenario::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

/// How a residual is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    Above,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub check_id: String,
    pub module: String,
    pub description: String,
    /// First 16 hex digits of a SHA-256 over the check's input description.
    pub inputs: String,
    pub residual: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub samples: usize,
    pub pass: bool,
}

pub fn digest(inputs: &str) -> String {
    let hash = Sha256::digest(inputs.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Identity of a check: its id, owning module and the property it states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckMeta {
    pub id: &'static str,
    pub module: &'static str,
    pub statement: &'static str,
}

impl CheckMeta {
    pub fn record(&self, inputs: &str, residual: f64, tolerance: f64, comparison: Comparison, samples: usize) -> Record {
        Record::new(self, inputs, residual, tolerance, comparison, samples)
    }

    pub fn failed(&self, error: &str) -> Record {
        Record::failed(self, error)
    }
}

impl Record {
    pub fn new(
        meta: &CheckMeta,
        inputs: &str,
        residual: f64,
        tolerance: f64,
        comparison: Comparison,
        samples: usize,
    ) -> Self {
        let pass = residual.is_finite()
            && match comparison {
                Comparison::AtMost => residual <= tolerance,
                Comparison::AtLeast => residual >= tolerance,
                Comparison::Above => residual > tolerance,
                Comparison::Equal => residual == tolerance,
            };
        Self {
            check_id: meta.id.into(),
            module: meta.module.into(),
            description: meta.statement.into(),
            inputs: digest(inputs),
            residual,
            tolerance,
            comparison,
            samples,
            pass,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(meta: &CheckMeta, error: &str) -> Self {
        Self {
            check_id: meta.id.into(),
            module: meta.module.into(),
            description: format!("{} [error: {error}]", meta.statement),
            inputs: digest(error),
            residual: f64::NAN,
            tolerance: f64::NAN,
            comparison: Comparison::AtMost,
            samples: 0,
            pass: false,
        }
    }

    pub fn summary_line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Above => ">",
            Comparison::Equal => "==",
        };
        format!(
            "{} {:<8} {:.3e} {op} {:.3e}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.check_id,
            self.residual,
            self.tolerance,
            self.description
        )
    }
}

/// One ray of the non-Hausdorff demo with its segments and chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRay {
    pub label: String,
    pub tau: f64,
    /// Parameter ranges `[s_lo, s_hi]` of the maximal segments.
    pub segments: Vec<[f64; 2]>,
    pub exclusion_hits: usize,
    /// Chart coordinate on the slice `x⁰ = 0` (absent if the ray misses it).
    pub coord_slice0: Option<f64>,
    pub coord_slice2: Option<f64>,
    pub gap_slice0: Option<f64>,
    pub gap_slice2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoSection {
    pub window: [f64; 2],
    pub limit_segments: Vec<[f64; 2]>,
    pub rays: Vec<DemoRay>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub suite: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub records: Vec<Record>,
    pub pass: bool,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonhausdorff: Option<DemoSection>,
}

impl Report {
    pub fn new(suite: &str, scenario: Option<Scenario>, mut records: Vec<Record>) -> Self {
        records.sort_by(|a, b| a.check_id.cmp(&b.check_id));
        let pass = !records.is_empty() && records.iter().all(|r| r.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            suite: suite.into(),
            scenario,
            records,
            pass,
            wall_time_s: 0.0,
            artifacts: Vec::new(),
            nonhausdorff: None,
        }
    }

    pub fn record(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.check_id == id)
    }

    /// Serialized report with wall-clock measurements zeroed (the overall
    /// wall time and any `*.runtime` record), for reproducibility checks.
    pub fn canonical_json(&self) -> CliResult<String> {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        for r in copy.records.iter_mut().filter(|r| r.check_id.ends_with(".runtime")) {
            r.residual = 0.0;
        }
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rows for `rays.csv`: one per stored node.
#[derive(Clone, Debug, Default)]
pub struct RayTable {
    pub m: usize,
    pub rows: Vec<(usize, usize, f64, Vec<f64>, Vec<f64>)>,
}

/// Rows for `jacobi.csv`: one per node of each propagated field.
#[derive(Clone, Debug, Default)]
pub struct JacobiTable {
    pub m: usize,
    pub rows: Vec<(usize, usize, f64, Vec<f64>, Vec<f64>, f64)>,
}

fn header(prefix: &[&str], m: usize, blocks: &[&str], suffix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for b in blocks {
        h.extend((0..m).map(|i| format!("{b}{i}")));
    }
    h.extend(suffix.iter().map(|s| s.to_string()));
    h
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn write_rays(path: &Path, table: &RayTable) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(&["ray", "segment", "t"], table.m, &["x", "v"], &[]))?;
    for (ray, seg, t, x, v) in &table.rows {
        let mut row = vec![ray.to_string(), seg.to_string(), num(*t)];
        row.extend(x.iter().chain(v).map(|c| num(*c)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jacobi(path: &Path, table: &JacobiTable) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(&["ray", "field", "t"], table.m, &["j", "p"], &["pairing"]))?;
    for (ray, field, t, j, p, pairing) in &table.rows {
        let mut row = vec![ray.to_string(), field.to_string(), num(*t)];
        row.extend(j.iter().chain(p).map(|c| num(*c)));
        row.push(num(*pairing));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals(path: &Path, records: &[Record]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check_id", "module", "residual", "tolerance", "comparison", "samples", "pass"])?;
    for r in records {
        let cmp = match r.comparison {
            Comparison::AtMost => "at_most",
            Comparison::AtLeast => "at_least",
            Comparison::Above => "above",
            Comparison::Equal => "equal",
        };
        w.write_record([
            r.check_id.clone(),
            r.module.clone(),
            num(r.residual),
            num(r.tolerance),
            cmp.to_string(),
            r.samples.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
