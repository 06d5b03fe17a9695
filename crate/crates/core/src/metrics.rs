//! Evaluation metrics and replicate aggregation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::datagen::OutcomeKind;
use crate::predict::CellPrediction;
use crate::{Error, Result};

fn check_labels(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(&y) => Err(Error::OutOfRange(format!("label {y} is not 0/1"))),
        None => Ok(()),
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("lengths {a} and {b} differ")));
    }
    if a == 0 {
        return Err(Error::EmptyInput("metric over no observations"));
    }
    Ok(())
}

/// Mann–Whitney AUC from mid-ranks; tied scores count one half.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    check_len(labels.len(), scores.len())?;
    check_labels(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("AUC score"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn brier(labels: &[f64], probs: &[f64]) -> Result<f64> {
    check_len(labels.len(), probs.len())?;
    check_labels(labels)?;
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRange(format!("probability {p}")));
    }
    Ok(labels.iter().zip(probs).map(|(y, p)| (y - p) * (y - p)).sum::<f64>() / labels.len() as f64)
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_len(truth.len(), pred.len())?;
    Ok(libm::sqrt(truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / truth.len() as f64))
}

/// Fraction of `truth` inside closed `[lo, hi]`, and the mean width.
pub fn coverage_and_width(truth: &[f64], lo: &[f64], hi: &[f64]) -> Result<(f64, f64)> {
    check_len(truth.len(), lo.len())?;
    check_len(truth.len(), hi.len())?;
    if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
        return Err(Error::OutOfRange(format!("interval {i} has lo {} > hi {}", lo[i], hi[i])));
    }
    let n = truth.len() as f64;
    let covered = (0..truth.len()).filter(|&i| lo[i] <= truth[i] && truth[i] <= hi[i]).count();
    let width = lo.iter().zip(hi).map(|(l, h)| h - l).sum::<f64>() / n;
    Ok((covered as f64 / n, width))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Auc,
    Brier,
    Rmse,
    Coverage,
    Width,
    WallSeconds,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Auc, Metric::Brier, Metric::Rmse, Metric::Coverage, Metric::Width, Metric::WallSeconds];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Brier => "brier",
            Metric::Rmse => "rmse",
            Metric::Coverage => "coverage",
            Metric::Width => "width",
            Metric::WallSeconds => "wall_seconds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// One scored value from one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub method: String,
    pub outcome: String,
    pub metric: Metric,
    pub value: f64,
}

/// Scores one outcome column: AUC and Brier for binary outcomes, RMSE plus
/// coverage and width (when intervals exist) otherwise. Cells whose truth
/// is `None` are skipped.
pub fn score_outcome(
    method: &str,
    outcome: &str,
    kind: OutcomeKind,
    truth: &[Option<f64>],
    cells: &[CellPrediction],
) -> Result<Vec<MetricRecord>> {
    check_len(truth.len(), cells.len())?;
    let (y, c): (Vec<f64>, Vec<&CellPrediction>) =
        truth.iter().zip(cells).filter_map(|(t, c)| t.map(|t| (t, c))).unzip();
    let means: Vec<f64> = c.iter().map(|c| c.mean).collect();
    let rec = |metric, value| MetricRecord { method: method.into(), outcome: outcome.into(), metric, value };
    let mut out = Vec::new();
    match kind {
        OutcomeKind::Binary => {
            out.push(rec(Metric::Auc, auc(&y, &means)?));
            out.push(rec(Metric::Brier, brier(&y, &means)?));
        }
        OutcomeKind::Count | OutcomeKind::Continuous => {
            out.push(rec(Metric::Rmse, rmse(&y, &means)?));
            let intervals: Option<Vec<_>> = c.iter().map(|c| c.interval).collect();
            if let Some(iv) = intervals {
                let lo: Vec<f64> = iv.iter().map(|i| i.lo).collect();
                let hi: Vec<f64> = iv.iter().map(|i| i.hi).collect();
                let (cov, width) = coverage_and_width(&y, &lo, &hi)?;
                out.push(rec(Metric::Coverage, cov));
                out.push(rec(Metric::Width, width));
            }
        }
    }
    Ok(out)
}

/// Replicate mean and sample sd for one (method, outcome, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub outcome: String,
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<AggregateRow>,
}

impl MetricReport {
    pub fn get(&self, method: &str, outcome: &str, metric: Metric) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.method == method && r.outcome == outcome && r.metric == metric)
    }

    /// Distinct methods in row order.
    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }
}

/// Mean and sample sd (divisor `n − 1`, zero for one value) per key.
/// Rows are sorted by (method, outcome, metric) so replicate order is
/// irrelevant.
pub fn aggregate(records: &[MetricRecord]) -> Result<MetricReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no metric records to aggregate"));
    }
    let mut sorted: Vec<&MetricRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.method.as_str(), a.outcome.as_str(), a.metric)
            .cmp(&(b.method.as_str(), b.outcome.as_str(), b.metric))
            .then(a.value.total_cmp(&b.value))
    });
    let mut rows = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let key = sorted[start];
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|r| r.method == key.method && r.outcome == key.outcome && r.metric == key.metric)
                .count();
        // summing in sorted value order keeps the result order-free bit for bit
        let vals: Vec<f64> = sorted[start..end].iter().map(|r| r.value).collect();
        let n = vals.len();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            libm::sqrt(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        rows.push(AggregateRow {
            method: key.method.clone(),
            outcome: key.outcome.clone(),
            metric: key.metric,
            mean,
            sd,
            n,
        });
        start = end;
    }
    Ok(MetricReport { rows })
}
