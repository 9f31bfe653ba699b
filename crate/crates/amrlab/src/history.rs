//! Refinement histories as CSV with the columns
//! `strategy,R,pct,h_min,N,E,q_h,wall_time`.
//!
//! Floats are written in shortest round-trip exponent form, so reading a
//! file back gives the exact values that were written.

use std::io::{Read, Write};
use std::path::Path;

use amrlab_core::error_metrics::fill_observed_orders;
use amrlab_core::{ConvergenceRecord, ErrorKind, ErrorSource, Strategy};

pub const HEADER: [&str; 8] = ["strategy", "R", "pct", "h_min", "N", "E", "q_h", "wall_time"];

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("header must be {expected}, found {found}")]
    Header { expected: String, found: String },
}

/// Writes `records`; with `deterministic` the informational wall time is
/// written as 0 so repeated runs give identical bytes.
pub fn write_history<W: Write>(w: W, records: &[ConvergenceRecord], deterministic: bool) -> Result<(), HistoryError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for r in records {
        let wall = if deterministic { 0.0 } else { r.wall_time };
        out.write_record([
            r.strategy.as_str().to_string(),
            r.level.to_string(),
            format!("{:e}", r.pct),
            format!("{:e}", r.h_min),
            r.n_dofs.to_string(),
            format!("{:e}", r.error),
            r.observed_order.map(|q| format!("{q:e}")).unwrap_or_default(),
            format!("{wall:e}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_history(path: &Path, records: &[ConvergenceRecord], deterministic: bool) -> Result<(), HistoryError> {
    write_history(std::fs::File::create(path)?, records, deterministic)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, row: usize) -> Result<T, HistoryError> {
    let raw = rec.get(k).unwrap_or("");
    raw.trim().parse().map_err(|_| HistoryError::Row { row, message: format!("bad {} value '{raw}'", HEADER[k]) })
}

/// Parses and validates every row against the record schema.
pub fn read_history<R: Read>(r: R) -> Result<Vec<ConvergenceRecord>, HistoryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if found != HEADER {
        return Err(HistoryError::Header { expected: HEADER.join(","), found: found.join(",") });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let strategy = Strategy::parse(rec.get(0).unwrap_or("").trim()).ok_or_else(|| HistoryError::Row {
            row,
            message: format!("strategy must be REG or AMR, got '{}'", rec.get(0).unwrap_or("")),
        })?;
        let q_raw = rec.get(6).unwrap_or("").trim();
        let record = ConvergenceRecord {
            strategy,
            level: field(&rec, 1, row)?,
            pct: field(&rec, 2, row)?,
            h_min: field(&rec, 3, row)?,
            n_dofs: field(&rec, 4, row)?,
            error: field(&rec, 5, row)?,
            observed_order: if q_raw.is_empty() { None } else { Some(field(&rec, 6, row)?) },
            wall_time: field(&rec, 7, row)?,
            kind: ErrorKind::Total,
            source: ErrorSource::Exact,
        };
        record.validate().map_err(|e| HistoryError::Row { row, message: e.to_string() })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_history(path: &Path) -> Result<Vec<ConvergenceRecord>, HistoryError> {
    read_history(std::fs::File::open(path)?)
}

/// `(N, E)` pairs, the input of a round-off fit.
pub fn dof_error_points(records: &[ConvergenceRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.n_dofs as f64, r.error)).collect()
}

/// Recomputes observed orders along a single-strategy series.
pub fn with_orders(mut records: Vec<ConvergenceRecord>) -> Vec<ConvergenceRecord> {
    fill_observed_orders(&mut records);
    records
}
