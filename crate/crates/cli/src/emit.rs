//! Writes results to disk: CSV tables plus a summary, or one JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::OutputFormat;
use crate::error::{io_err, Result};
use crate::result::{ExperimentResult, Table};

pub const SUMMARY_FILE: &str = "summary.json";
pub const RESULT_FILE: &str = "result.json";

/// Seventeen significant digits, enough to round-trip any `f64`.
fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_cell(*v)))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes `result` under `dir` and returns the files created.
///
/// CSV: one file per table plus `summary.json` holding everything except the
/// table rows. JSON: a single `result.json` with the full result.
pub fn emit(result: &ExperimentResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Csv => {
            for table in &result.tables {
                written.push(write_table(dir, table)?);
            }
            let summary = ExperimentResult {
                tables: result
                    .tables
                    .iter()
                    .map(|t| Table {
                        rows: Vec::new(),
                        ..t.clone()
                    })
                    .collect(),
                ..result.clone()
            };
            let path = dir.join(SUMMARY_FILE);
            write_json(&path, &summary)?;
            written.push(path);
        }
        OutputFormat::Json => {
            let path = dir.join(RESULT_FILE);
            write_json(&path, result)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Reads back a table written by [`emit`].
pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let columns = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|c| if c.is_empty() { None } else { c.parse().ok() })
                .collect(),
        );
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Table { name, columns, rows })
}

pub fn read_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
