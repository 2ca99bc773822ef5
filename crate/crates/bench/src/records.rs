//! Record CSVs: `seed,iteration,loss_kind,alpha,metric_name,metric_value`.
//!
//! Non-finite numbers are written as `nan`, `inf` and `-inf`. Rows that do
//! not belong to a loss kind (gradient checks of the network alone, for
//! instance) carry `-` in the `loss_kind` column.

use std::io::{Read, Write};
use std::path::Path;

use entropic_core::RunRecord;

use crate::BenchError;

pub const HEADER: [&str; 6] = ["seed", "iteration", "loss_kind", "alpha", "metric_name", "metric_value"];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub iteration: u64,
    pub loss_kind: String,
    pub alpha: f64,
    pub metric_name: String,
    pub metric_value: f64,
}

impl Row {
    pub fn new(seed: u64, iteration: u64, loss_kind: impl Into<String>, alpha: f64, metric: impl Into<String>, value: f64) -> Self {
        Self { seed, iteration, loss_kind: loss_kind.into(), alpha, metric_name: metric.into(), metric_value: value }
    }
}

impl From<RunRecord> for Row {
    fn from(r: RunRecord) -> Self {
        Self::new(r.seed, r.iteration, r.loss_kind.as_str(), r.alpha, r.metric_name, r.metric_value)
    }
}

/// Shortest round-trip decimal, with lowercase non-finite tokens. Magnitudes
/// outside `[1e-5, 1e16)` use exponent form.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x != 0.0 && (x.abs() < 1e-5 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" | "NaN" => Some(f64::NAN),
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.iteration.to_string(),
            r.loss_kind.clone(),
            fmt_f64(r.alpha),
            r.metric_name.clone(),
            fmt_f64(r.metric_value),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(std::path::Path::new("<output>"), e))?;
    Ok(())
}

pub fn write_rows_to(path: &Path, rows: &[Row]) -> Result<(), BenchError> {
    let f = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_rows(std::io::BufWriter::new(f), rows)
}

/// Parses a record CSV; errors name the offending line.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<Row>, BenchError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(BenchError::Parse { line: 1, msg: format!("expected header {}", HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| BenchError::Parse { line: e.position().map_or(0, |p| p.line()), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| BenchError::Parse { line, msg: format!("bad {what}") };
        if rec.len() != HEADER.len() {
            return Err(bad("column count"));
        }
        rows.push(Row {
            seed: rec[0].trim().parse().map_err(|_| bad("seed"))?,
            iteration: rec[1].trim().parse().map_err(|_| bad("iteration"))?,
            loss_kind: rec[2].trim().to_string(),
            alpha: parse_f64(&rec[3]).ok_or_else(|| bad("alpha"))?,
            metric_name: rec[4].trim().to_string(),
            metric_value: parse_f64(&rec[5]).ok_or_else(|| bad("metric_value"))?,
        });
    }
    Ok(rows)
}

pub fn read_rows_from(path: &Path) -> Result<Vec<Row>, BenchError> {
    let f = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    read_rows(std::io::BufReader::new(f))
}
