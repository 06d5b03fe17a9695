//! Metric tables.
//!
//! `report.csv` mirrors the published tables: one row per (outcome, metric),
//! one column per method, cells `mean (sd)`. `aggregate.csv` carries the same
//! numbers at full precision and `raw_metrics.csv` every per-replicate value.

use mdgp_core::metrics::{AggregateRow, Metric, MetricRecord, MetricReport};

use super::{csv_line, fmt_f64, parse_f64, reader, record_line};
use crate::{Error, Result};

pub fn format_report(report: &MetricReport, comment: &str) -> String {
    let methods = report.methods();
    let mut keys: Vec<(&str, Metric)> = Vec::new();
    for r in &report.rows {
        if !keys.contains(&(r.outcome.as_str(), r.metric)) {
            keys.push((&r.outcome, r.metric));
        }
    }
    keys.sort();
    let mut out = String::from(comment);
    out.push_str(&csv_line(["outcome", "metric"].into_iter().chain(methods.iter().copied())));
    for (outcome, metric) in keys {
        let cells = methods.iter().map(|m| {
            report.get(m, outcome, metric).map(|r| format!("{:.3} ({:.3})", r.mean, r.sd)).unwrap_or_default()
        });
        out.push_str(&csv_line([outcome.to_string(), metric.as_str().to_string()].into_iter().chain(cells)));
    }
    out
}

pub fn format_aggregate(report: &MetricReport, comment: &str) -> String {
    let mut out = String::from(comment);
    out.push_str(&csv_line(["method", "outcome", "metric", "mean", "sd", "n"]));
    for r in &report.rows {
        out.push_str(&csv_line([
            r.method.clone(),
            r.outcome.clone(),
            r.metric.as_str().to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.sd),
            r.n.to_string(),
        ]));
    }
    out
}

pub fn parse_aggregate(text: &str) -> Result<MetricReport> {
    let mut rdr = reader(text);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        rows.push(AggregateRow {
            method: rec[0].to_string(),
            outcome: rec[1].to_string(),
            metric: parse_metric(&rec[2], line)?,
            mean: parse_f64(&rec[3], line, "mean")?,
            sd: parse_f64(&rec[4], line, "sd")?,
            n: rec[5].parse().map_err(|_| Error::TypeViolation {
                line,
                column: "n".into(),
                value: rec[5].to_string(),
                expected: "a count",
            })?,
        });
    }
    Ok(MetricReport { rows })
}

fn parse_metric(s: &str, line: u64) -> Result<Metric> {
    Metric::parse(s).ok_or_else(|| Error::TypeViolation {
        line,
        column: "metric".into(),
        value: s.to_string(),
        expected: "a metric name",
    })
}

/// Records tagged with their replicate index.
pub fn format_raw(records: &[(usize, MetricRecord)], comment: &str) -> String {
    let mut out = String::from(comment);
    out.push_str(&csv_line(["replicate", "method", "outcome", "metric", "value"]));
    for (rep, r) in records {
        out.push_str(&csv_line([
            rep.to_string(),
            r.method.clone(),
            r.outcome.clone(),
            r.metric.as_str().to_string(),
            fmt_f64(r.value),
        ]));
    }
    out
}

pub fn parse_raw(text: &str) -> Result<Vec<(usize, MetricRecord)>> {
    let mut rdr = reader(text);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let rep = rec[0].parse().map_err(|_| Error::TypeViolation {
            line,
            column: "replicate".into(),
            value: rec[0].to_string(),
            expected: "a replicate index",
        })?;
        out.push((
            rep,
            MetricRecord {
                method: rec[1].to_string(),
                outcome: rec[2].to_string(),
                metric: parse_metric(&rec[3], line)?,
                value: parse_f64(&rec[4], line, "value")?,
            },
        ));
    }
    Ok(out)
}
