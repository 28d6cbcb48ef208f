//! CSV tables and the run manifest. Tables are rendered to bytes in memory
//! so a run can be repeated and compared before anything touches disk.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One CSV output, already rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub bytes: Vec<u8>,
    pub rows: usize,
}

pub struct TableBuilder {
    name: String,
    writer: csv::Writer<Vec<u8>>,
    width: usize,
    rows: usize,
}

impl TableBuilder {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { name: name.to_owned(), writer, width: header.len(), rows: 0 }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.width, "row width does not match header of {}", self.name);
        let rec: Vec<String> = cells.iter().map(Cell::render).collect();
        self.writer.write_record(&rec).expect("writing to memory");
        self.rows += 1;
    }

    pub fn finish(self) -> Table {
        let bytes = self.writer.into_inner().expect("flushing to memory");
        Table { name: self.name, bytes, rows: self.rows }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Num(f64),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn render(&self) -> String {
        match *self {
            Cell::Empty => String::new(),
            Cell::Num(v) => format_float(v),
        }
    }
}

/// Shortest round-trip text; exponent form outside [1e-4, 1e15).
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Everything a command produces. Only `tables` must be reproducible.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub resolved: Map<String, Value>,
    pub results: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    pub fn result(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), json(v));
    }

    pub fn resolve(&mut self, key: &str, v: impl Serialize) {
        self.resolved.insert(key.into(), json(v));
    }

    pub fn diagnose(&mut self, key: &str, v: impl Serialize) {
        self.diagnostics.insert(key.into(), json(v));
    }
}

/// serde_json refuses non-finite floats; those become null.
pub fn json(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub threads: usize,
    /// Repeat runs compared byte-for-byte (1 when `--seed-check` is off).
    pub determinism_runs: usize,
    pub wall_clock_s: f64,
    pub resolved: Map<String, Value>,
    pub outputs: Vec<OutputEntry>,
    pub results: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes every table, then the manifest last.
pub fn write_outputs(
    dir: &Path,
    tables: &[Table],
    manifest: impl FnOnce(Vec<OutputEntry>) -> RunManifest,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut entries = Vec::with_capacity(tables.len());
    for t in tables {
        let path = dir.join(&t.name);
        std::fs::write(&path, &t.bytes).map_err(|e| CliError::io(&path, e))?;
        entries.push(OutputEntry {
            file: t.name.clone(),
            sha256: sha256_hex(&t.bytes),
            rows: t.rows,
            bytes: t.bytes.len(),
        });
    }
    let m = manifest(entries);
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, 1.5, -2.25e-7, 6.02e23, 1.0 / 3.0, 1e-4, 123456.789] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(2.5e-9), "2.5e-9");
    }

    #[test]
    fn table_layout() {
        let mut t = TableBuilder::new("x.csv", &["a", "b"]);
        t.row(&[1.0.into(), Cell::Empty]);
        let t = t.finish();
        assert_eq!(String::from_utf8(t.bytes).unwrap(), "a,b\n1,\n");
        assert_eq!(t.rows, 1);
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
