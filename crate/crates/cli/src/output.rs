//! Artifact writers. Tabular data goes to CSV with a header row; reports go
//! to JSON wrapped in an envelope carrying the subcommand, the configuration
//! hash and the library version. Identical config and seed produce identical
//! bytes: field order is fixed by the types and floats are written
//! round-trip safe (17 significant digits in CSV, shortest round-trip form
//! in JSON, where non-finite values become `null`).

use crate::config::CliError;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// `{:.16e}` carries 17 significant digits, enough to reconstruct the exact
/// bit pattern; non-finite values are spelled out since CSV has no null.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.header.join(",");
        text.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    subcommand: &'a str,
    config_hash: &'a str,
    library_version: &'a str,
    report: &'a T,
}

pub fn write_json<T: Serialize>(
    path: &Path,
    subcommand: &str,
    config_hash: &str,
    report: &T,
) -> Result<(), CliError> {
    let envelope = Envelope { subcommand, config_hash, library_version: crnhje::VERSION, report };
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn artifact_path(out_dir: &Path, subcommand: &str, hash: &str, ext: &str) -> PathBuf {
    out_dir.join(format!("{subcommand}-{hash}.{ext}"))
}
