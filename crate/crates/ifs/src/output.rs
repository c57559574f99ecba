//! Reports and point-cloud files.
//!
//! Reports are pretty-printed JSON with sorted keys; CSV floats use Rust's
//! shortest round-trip formatting. Both are byte-identical across runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use ifs_core::Point;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub experiment: Option<String>,
    pub parameters: Value,
    pub results: Value,
    pub verdicts: BTreeMap<String, bool>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Schema(e.to_string()))?;
        text.push('\n');
        fs::write(dir.join(format!("{}.json", self.command)), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// JSON-friendly value: `+inf` becomes the string `"inf"`.
pub fn real(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::Null
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn point(p: &Point) -> Value {
    let e = p.embed();
    Value::from(
        e[..p.embed_dim()]
            .iter()
            .map(|v| real(*v))
            .collect::<Vec<_>>(),
    )
}

pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Cartesian coordinates `x1, x2, ...` of a point as CSV fields.
pub fn coords(p: &Point) -> Vec<String> {
    let e = p.embed();
    e[..p.embed_dim()].iter().map(|v| fmt_real(*v)).collect()
}

pub fn coord_headers(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// Writes a CSV file with a header row.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
