use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

pub const TOOL: &str = "subag";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Rows plus optional trailing comment lines.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub trailer: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new(), trailer: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip formatting; infinities as `inf` and `-inf`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

pub fn writer(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `table` as CSV or `result` as JSON, both preceded by the tool version and config echo.
pub fn emit(
    out: &mut dyn Write,
    format: Format,
    command: &str,
    config: &Value,
    table: &Table,
    result: &Value,
) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# {TOOL} {VERSION}")?;
            writeln!(out, "# command: {command}")?;
            writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
            writeln!(out, "{}", table.columns.join(","))?;
            for row in &table.rows {
                writeln!(out, "{}", row.join(","))?;
            }
            for line in &table.trailer {
                writeln!(out, "# {line}")?;
            }
        }
        Format::Json => {
            let doc = json!({
                "tool": TOOL,
                "version": VERSION,
                "command": command,
                "config": config,
                "result": result,
            });
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()
}
