//! Final-metric summary tables.
//!
//! The final value of a run is its row with the largest iteration for a given
//! `(loss_kind, alpha, seed, metric_name)`. Finals are grouped by
//! `(loss_kind, alpha, metric_name)`; non-finite finals are counted and left
//! out of the statistics.

use std::collections::BTreeMap;
use std::io::Write;

use crate::records::{fmt_f64, Row};
use crate::BenchError;

pub const SUMMARY_HEADER: [&str; 10] =
    ["experiment", "loss_kind", "alpha", "metric_name", "runs", "nonfinite", "mean", "std", "min", "max"];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub loss_kind: String,
    pub alpha: f64,
    pub metric_name: String,
    pub runs: usize,
    pub nonfinite: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single finite run.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

// alpha is keyed by its bit pattern so that grouping is exact
type Key = (String, u64, String);

/// Final value per run, keyed by group then seed.
pub fn final_values(rows: &[Row]) -> BTreeMap<Key, BTreeMap<u64, (u64, f64)>> {
    let mut finals: BTreeMap<Key, BTreeMap<u64, (u64, f64)>> = BTreeMap::new();
    for r in rows {
        let key = (r.loss_kind.clone(), r.alpha.to_bits(), r.metric_name.clone());
        let slot = finals.entry(key).or_default().entry(r.seed).or_insert((r.iteration, r.metric_value));
        if r.iteration >= slot.0 {
            *slot = (r.iteration, r.metric_value);
        }
    }
    finals
}

pub fn summarize(experiment: &str, rows: &[Row]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for ((kind, alpha_bits, metric), runs) in final_values(rows) {
        let values: Vec<f64> = runs.values().map(|v| v.1).collect();
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        let (mean, std, min, max) = if n == 0 {
            eprintln!("warning: {experiment} {kind} alpha={} {metric}: no finite runs", f64::from_bits(alpha_bits));
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = finite.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (mean, var.sqrt(), min, max)
        };
        out.push(SummaryRow {
            experiment: experiment.to_string(),
            loss_kind: kind,
            alpha: f64::from_bits(alpha_bits),
            metric_name: metric,
            runs: values.len(),
            nonfinite: values.len() - n,
            mean,
            std,
            min,
            max,
        });
    }
    out
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.loss_kind.clone(),
            fmt_f64(r.alpha),
            r.metric_name.clone(),
            r.runs.to_string(),
            r.nonfinite.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.std),
            fmt_f64(r.min),
            fmt_f64(r.max),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(std::path::Path::new("<output>"), e))?;
    Ok(())
}

/// Experiment name from a records path: `out/gaussian_trading.records.csv` → `gaussian_trading`.
pub fn experiment_name(path: &std::path::Path) -> String {
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("records");
    file.trim_end_matches(".csv").trim_end_matches(".records").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finals(values: &[f64]) -> Vec<Row> {
        values.iter().enumerate().map(|(i, &v)| Row::new(i as u64 + 1, 100, "is", 1.0, "rmse", v)).collect()
    }

    #[test]
    fn identical_runs_have_zero_spread() {
        let s = summarize("x", &finals(&[0.25; 5]));
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].mean, s[0].std, s[0].runs, s[0].nonfinite), (0.25, 0.0, 5, 0));
    }

    #[test]
    fn non_finite_runs_are_counted_not_averaged() {
        let s = summarize("x", &finals(&[1.0, 2.0, f64::INFINITY, 3.0, 4.0]));
        assert_eq!((s[0].runs, s[0].nonfinite), (5, 1));
        assert_eq!((s[0].mean, s[0].min, s[0].max), (2.5, 1.0, 4.0));
        assert!((s[0].std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn last_iteration_wins() {
        let rows = vec![
            Row::new(1, 0, "is", 1.0, "rmse", 9.0),
            Row::new(1, 500, "is", 1.0, "rmse", 0.1),
            Row::new(1, 200, "is", 1.0, "rmse", 5.0),
        ];
        assert_eq!(summarize("x", &rows)[0].mean, 0.1);
    }

    #[test]
    fn all_failed_group_keeps_its_count() {
        let s = summarize("x", &finals(&[f64::NAN, f64::NAN]));
        assert_eq!((s[0].runs, s[0].nonfinite), (2, 2));
        assert!(s[0].mean.is_nan());
    }

    #[test]
    fn name_from_path() {
        assert_eq!(experiment_name(std::path::Path::new("out/deep_hedging.records.csv")), "deep_hedging");
    }
}
