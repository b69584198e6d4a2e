//! Experiment reports: checks with tolerances and verdicts, the seed
//! manifest and tabular attachments.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a pass/fail decision.
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    /// `value < limit`.
    Below { limit: f64 },
    /// `value <= limit`.
    AtMost { limit: f64 },
    /// `value >= limit`.
    AtLeast { limit: f64 },
    /// `|value - target| <= tol`.
    Within { target: f64, tol: f64 },
    /// `lo <= value <= hi`.
    Band { lo: f64, hi: f64 },
    None,
}

impl Tolerance {
    fn accepts(&self, v: f64) -> bool {
        match *self {
            Tolerance::Below { limit } => v < limit,
            Tolerance::AtMost { limit } => v <= limit,
            Tolerance::AtLeast { limit } => v >= limit,
            Tolerance::Within { target, tol } => (v - target).abs() <= tol,
            Tolerance::Band { lo, hi } => v >= lo && v <= hi,
            Tolerance::None => true,
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Below { limit } => write!(f, "< {limit:?}"),
            Tolerance::AtMost { limit } => write!(f, "<= {limit:?}"),
            Tolerance::AtLeast { limit } => write!(f, ">= {limit:?}"),
            Tolerance::Within { target, tol } => write!(f, "{target:?} +/- {tol:?}"),
            Tolerance::Band { lo, hi } => write!(f, "in [{lo:?}, {hi:?}]"),
            Tolerance::None => f.write_str("report only"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Tolerance,
    pub verdict: Verdict,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: Tolerance) -> Self {
        let verdict = match tolerance {
            Tolerance::None => Verdict::Info,
            ref t if t.accepts(value) => Verdict::Pass,
            _ => Verdict::Fail,
        };
        Self { name: name.into(), value, tolerance, verdict }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Tolerance::Below { limit })
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Tolerance::AtMost { limit })
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, Tolerance::AtLeast { limit })
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::new(name, value, Tolerance::Within { target, tol })
    }

    pub fn band(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, Tolerance::Band { lo, hi })
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Tolerance::None)
    }

    /// Downgrades a decided check to a report-only one.
    pub fn into_info(mut self) -> Self {
        self.verdict = Verdict::Info;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {:?} ({})", self.verdict, self.name, self.value, self.tolerance)
    }
}

/// Everything needed to rerun an experiment bit for bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Replica `i` reads stream `first_stream + i`.
    pub first_stream: u64,
    pub replicas: u64,
    pub software_version: String,
    /// SHA-256 of the canonical configuration text.
    pub config_hash: String,
}

impl Manifest {
    pub fn new(seed: u64, replicas: u64, canonical_config: &str) -> Self {
        Self {
            seed,
            first_stream: 0,
            replicas,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash_hex(canonical_config),
        }
    }

    /// First 16 hex digits, used as a directory name.
    pub fn short_hash(&self) -> &str {
        &self.config_hash[..16]
    }
}

pub fn hash_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub manifest: Manifest,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    /// The manifest hash covers the experiment name, parameters, seed and replicas.
    pub fn new(experiment: &str, parameters: BTreeMap<String, serde_json::Value>, seed: u64, replicas: u64) -> Self {
        let canonical = format!(
            "experiment={experiment}\nparameters={}\nseed={seed}\nreplicas={replicas}\n",
            serde_json::to_string(&parameters).expect("json values serialize")
        );
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            parameters,
            manifest: Manifest::new(seed, replicas, &canonical),
            checks: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds a parameter map from `key => value` pairs.
#[macro_export]
macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = std::collections::BTreeMap::<String, serde_json::Value>::new();
        $(m.insert($k.to_string(), serde_json::json!($v));)*
        m
    }};
}
