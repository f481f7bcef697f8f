//! CSV and JSON artifacts.
//!
//! CSV files are UTF-8, comma separated, with a header row and LF line
//! endings. Floats are written as `{:.16e}` (17 significant digits, enough
//! to round-trip), integers and booleans as plain text.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::{Check, RunError};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::U(v) => v.to_string(),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io(format!("write {}: {e}", path.display()))
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| RunError::Io(format!("write {}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(Cell::text)).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

pub const REPORT_HEADER: [&str; 5] = ["check", "value", "expected", "tolerance", "pass"];

pub fn write_report(path: &Path, checks: &[Check]) -> Result<(), RunError> {
    write_csv(
        path,
        &REPORT_HEADER,
        checks.iter().map(|c| {
            vec![
                Cell::S(c.check.clone()),
                Cell::F(c.value),
                Cell::F(c.expected),
                Cell::F(c.tolerance),
                Cell::B(c.pass),
            ]
        }),
    )
}
