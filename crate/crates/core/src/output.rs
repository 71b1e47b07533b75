//! CSV tables and JSON run manifests.
//!
//! Reals are written with 15 significant digits. Everything in a run
//! directory is a function of the configuration except `timing` in the
//! manifest; `content_sha256` hashes the rest.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Flag(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// 15 significant digits in scientific notation.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.14e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the schema of {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

/// Everything a command produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: String,
    pub config: RunConfig,
    pub tables: Vec<Table>,
    pub results: Value,
    pub defects: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub package: String,
    pub format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub results: Value,
    pub defects: Value,
    pub files: Vec<FileDigest>,
    pub versions: Versions,
    /// Hash of every field above.
    pub content_sha256: String,
    pub timing: Timing,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Removes the run-directory lock when dropped.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(io_error(&path))?;
        Ok(Self(path))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Write every table as `<name>.csv` and the manifest as `manifest.json`.
pub fn emit_outputs(dir: &Path, out: &RunOutput, wall_seconds: f64) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let _lock = DirLock::acquire(dir)?;
    let mut files = Vec::new();
    for table in &out.tables {
        let name = format!("{}.csv", table.name);
        let path = dir.join(&name);
        let text = table.to_csv();
        fs::write(&path, &text).map_err(io_error(&path))?;
        files.push(FileDigest {
            name,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let mut manifest = Manifest {
        command: out.command.clone(),
        config: out.config.clone(),
        seed: out.config.seed,
        results: out.results.clone(),
        defects: out.defects.clone(),
        files,
        versions: Versions {
            package: env!("CARGO_PKG_VERSION").to_string(),
            format: 1,
        },
        content_sha256: String::new(),
        timing: Timing { wall_seconds: 0.0 },
    };
    manifest.content_sha256 = sha256_hex(&serde_json::to_vec(&manifest).expect("manifest serialises"));
    manifest.timing.wall_seconds = wall_seconds;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(io_error(&path))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Header and records of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(format_real(1.0 / 3.0), "3.33333333333333e-1");
        assert_eq!(format_real(-2.5e10), "-2.50000000000000e10");
        let x = 0.123_456_789_012_345_67;
        let back: f64 = format_real(x).parse().unwrap();
        assert!((back - x).abs() <= 5e-15 * x);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", &["n", "t", "ok"]);
        t.push(vec![0usize.into(), 0.5.into(), true.into()]);
        assert_eq!(t.to_csv(), "n,t,ok\n0,5.00000000000000e-1,true\n");
    }

    #[test]
    #[should_panic]
    fn rejects_ragged_rows() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![1usize.into()]);
    }
}
