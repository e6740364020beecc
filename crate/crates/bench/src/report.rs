use std::fmt::Write;
use std::path::Path;

use crate::{BenchError, BenchReport};

fn check(r: &BenchReport) -> Result<(), BenchError> {
    let ordered = r.latency_p50 <= r.latency_p90 && r.latency_p90 <= r.latency_p99 && r.latency_p99 <= r.latency_max;
    if !ordered {
        return Err(BenchError::InvariantViolation(format!(
            "{}: percentiles out of order (p50 {} p90 {} p99 {} max {})",
            r.scenario, r.latency_p50, r.latency_p90, r.latency_p99, r.latency_max
        )));
    }
    Ok(())
}

const HEADER: [&str; 10] = ["scenario", "format", "requests", "rps", "texts/s", "p50 ms", "p90 ms", "p99 ms", "max ms", "errors"];

/// Aligned text table, one row per report.
pub fn render_table(reports: &[BenchReport]) -> Result<String, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Config("no reports to render".into()));
    }
    let mut rows = vec![HEADER.map(String::from).to_vec()];
    for r in reports {
        check(r)?;
        rows.push(vec![
            r.scenario.clone(),
            r.format.to_string(),
            r.total_requests.to_string(),
            format!("{:.1}", r.rps),
            format!("{:.1}", r.texts_per_sec),
            format!("{:.3}", r.latency_p50),
            format!("{:.3}", r.latency_p90),
            format!("{:.3}", r.latency_p99),
            format!("{:.3}", r.latency_max),
            r.error_count.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..HEADER.len()).map(|c| rows.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Renders the table and, when `json_out` is given, writes the reports
/// there as a JSON array.
pub fn render_report(reports: &[BenchReport], json_out: Option<&Path>) -> Result<String, BenchError> {
    let table = render_table(reports)?;
    if let Some(path) = json_out {
        let json = serde_json::to_vec_pretty(reports).expect("reports serialize");
        std::fs::write(path, json).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })?;
    }
    Ok(table)
}

/// Shape of a single / batch-10 / batch-100 ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderShape {
    pub rps_strictly_decreasing: bool,
    /// Largest over smallest texts/sec across rungs.
    pub texts_per_sec_spread: f64,
}

pub fn ladder_shape(reports: &[BenchReport]) -> LadderShape {
    let rps_strictly_decreasing = reports.windows(2).all(|w| w[1].rps < w[0].rps);
    let tps = reports.iter().map(|r| r.texts_per_sec);
    let max = tps.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = tps.fold(f64::INFINITY, f64::min);
    LadderShape { rps_strictly_decreasing, texts_per_sec_spread: max / min }
}
