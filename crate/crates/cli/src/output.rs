//! Output sinks and the CSV/JSON table writer.
//!
//! CSV starts with a `# config: <json>` echo line, then a header row. Floats
//! use 17 significant digits; absent values are empty cells.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rank1sense::altmin::{fmt_f64, fmt_opt};
use serde::Serialize;

use crate::args::{Format, Resolved};

/// Open the destination up front so an unwritable path fails before any
/// computation starts.
pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub trait CsvRow {
    const HEADER: &'static str;
    fn cells(&self) -> Vec<String>;
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

pub fn opt(x: Option<f64>) -> String {
    fmt_opt(x)
}

pub fn echo_line(cfg: &Resolved) -> String {
    format!("# config: {}", serde_json::to_string(cfg).expect("config serializes"))
}

pub fn write_csv<R: CsvRow>(w: &mut dyn Write, cfg: &Resolved, rows: &[R]) -> io::Result<()> {
    writeln!(w, "{}", echo_line(cfg))?;
    writeln!(w, "{}", R::HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.cells().join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Document<'a, R> {
    config: &'a Resolved,
    rows: &'a [R],
}

pub fn write_json_value(w: &mut dyn Write, value: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

/// Rows in the configured format, then flush.
pub fn write_table<R: CsvRow + Serialize>(mut w: Box<dyn Write>, cfg: &Resolved, rows: &[R]) -> io::Result<()> {
    match cfg.format {
        Format::Csv => write_csv(&mut *w, cfg, rows)?,
        Format::Json => write_json_value(&mut *w, &Document { config: cfg, rows })?,
    }
    w.flush()
}
