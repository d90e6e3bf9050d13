//! CSV export and parsing for recorded runs.
//!
//! Numbers are printed with 12 fractional digits of scientific
//! notation (13 significant digits), enough for a parse → export round
//! trip to agree within a 1e-12 relative tolerance. Output is
//! byte-stable: the same trajectory always serializes to the same
//! bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::scalar::Scalar;
use crate::sim::engine::SimError;
use crate::sim::trajectory::{Cell, DataTable, Trajectory};

/// Formats one numeric cell.
fn format_number(v: f64) -> String {
    format!("{v:.12e}")
}

/// Renders a table as CSV text.
pub fn table_to_csv(table: &DataTable) -> String {
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let mut first = true;
        for cell in row {
            if !first {
                out.push(',');
            }
            first = false;
            match cell {
                Cell::Num(v) => {
                    let _ = write!(out, "{}", format_number(*v));
                }
                Cell::Text(s) => out.push_str(s),
                Cell::Empty => {}
            }
        }
        out.push('\n');
    }
    out
}

/// Writes a trajectory to `path` as CSV.
pub fn export_csv<S: Scalar>(traj: &Trajectory<S>, path: &Path) -> Result<(), SimError> {
    let text = table_to_csv(&traj.to_table());
    std::fs::write(path, text).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses CSV text into a table. Cells that parse as finite floats
/// become numeric; empty cells stay empty; anything else is text.
pub fn parse_csv_text(text: &str, origin: &str) -> Result<DataTable, SimError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| SimError::Parse {
        path: origin.to_string(),
        detail: "empty file (no header row)".to_string(),
    })?;
    let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<Cell> = line
            .split(',')
            .map(|field| {
                if field.is_empty() {
                    Cell::Empty
                } else {
                    match field.parse::<f64>() {
                        Ok(v) if v.is_finite() => Cell::Num(v),
                        _ => Cell::Text(field.to_string()),
                    }
                }
            })
            .collect();
        if cells.len() != columns.len() {
            return Err(SimError::Parse {
                path: origin.to_string(),
                detail: format!(
                    "line {}: {} fields, header has {}",
                    lineno + 2,
                    cells.len(),
                    columns.len()
                ),
            });
        }
        rows.push(cells);
    }
    Ok(DataTable { columns, rows })
}

/// Reads and parses a CSV file.
pub fn parse_csv(path: &Path) -> Result<DataTable, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv_text(&text, &path.display().to_string())
}
