//! Prediction CSV, one row per (location, outcome):
//!
//! ```text
//! id,s:x,s:y,outcome,mean,lo,hi,sd
//! 0,0.25,0.5,binary,0.71,0,1,0.08
//! 0,0.25,0.5,count,2.4,0,6,0.31
//! ```
//!
//! `id` is the row index in the location file. Methods without intervals or
//! spread leave `lo`, `hi` and `sd` empty.

use mdgp_core::datagen::Location;
use mdgp_core::predict::{CellPrediction, Interval, Prediction};

use super::{csv_line, fmt_f64, parse_f64, reader, record_line};
use crate::{Error, Result};

pub fn format_prediction(pred: &Prediction, locations: &[Location], coord_names: &[String], comment: &str) -> String {
    let mut out = String::from(comment);
    let header = ["id".to_string()]
        .into_iter()
        .chain(coord_names.iter().map(|n| format!("s:{n}")))
        .chain(["outcome", "mean", "lo", "hi", "sd"].map(String::from));
    out.push_str(&csv_line(header));
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for (i, (row, loc)) in pred.cells.iter().zip(locations).enumerate() {
        for (cell, spec) in row.iter().zip(&pred.outcomes) {
            let fields = [i.to_string()].into_iter().chain(loc.0.iter().map(|&c| fmt_f64(c))).chain([
                spec.name.clone(),
                fmt_f64(cell.mean),
                opt(cell.interval.map(|iv| iv.lo)),
                opt(cell.interval.map(|iv| iv.hi)),
                opt(cell.sd),
            ]);
            out.push_str(&csv_line(fields));
        }
    }
    out
}

/// Cells keyed by `(id, outcome)`, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub rows: Vec<(usize, String, CellPrediction)>,
}

impl PredictionTable {
    /// Column for `outcome`, ordered by id; `n` sets the expected length.
    pub fn column(&self, outcome: &str, n: usize) -> Result<Vec<CellPrediction>> {
        let mut out: Vec<Option<CellPrediction>> = vec![None; n];
        for (id, name, cell) in &self.rows {
            if name == outcome {
                let slot = out
                    .get_mut(*id)
                    .ok_or_else(|| Error::Header(format!("prediction id {id} beyond the {n} truth rows")))?;
                *slot = Some(*cell);
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::Header(format!("no `{outcome}` prediction for id {i}"))))
            .collect()
    }
}

pub fn parse_prediction(text: &str) -> Result<PredictionTable> {
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Header(format!("missing column `{name}`")))
    };
    let (id, outcome, mean, lo, hi, sd) =
        (col("id")?, col("outcome")?, col("mean")?, col("lo")?, col("hi")?, col("sd")?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let opt = |k: usize, name: &str| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                parse_f64(&rec[k], line, name).map(Some)
            }
        };
        let ident = rec[id].parse::<usize>().map_err(|_| Error::TypeViolation {
            line,
            column: "id".into(),
            value: rec[id].to_string(),
            expected: "a row index",
        })?;
        let interval = match (opt(lo, "lo")?, opt(hi, "hi")?) {
            (Some(lo), Some(hi)) => Some(Interval { lo, hi }),
            (None, None) => None,
            _ => return Err(Error::MalformedRow { line, reason: "only one interval endpoint".into() }),
        };
        let cell = CellPrediction { mean: parse_f64(&rec[mean], line, "mean")?, interval, sd: opt(sd, "sd")? };
        rows.push((ident, rec[outcome].to_string(), cell));
    }
    Ok(PredictionTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdgp_core::datagen::{OutcomeKind, OutcomeSpec};

    #[test]
    fn round_trip() {
        let pred = Prediction {
            outcomes: vec![OutcomeSpec::new("b", OutcomeKind::Binary), OutcomeSpec::new("c", OutcomeKind::Count)],
            cells: vec![vec![
                CellPrediction { mean: 0.1 + 0.2, interval: None, sd: Some(1e-17) },
                CellPrediction { mean: 2.5, interval: Some(Interval { lo: 0.0, hi: 7.0 }), sd: None },
            ]],
        };
        let text = format_prediction(&pred, &[Location(vec![0.5, -1.0])], &["x".into(), "y".into()], "# c\n");
        let t = parse_prediction(&text).unwrap();
        assert_eq!(t.column("b", 1).unwrap()[0], pred.cells[0][0]);
        assert_eq!(t.column("c", 1).unwrap()[0], pred.cells[0][1]);
        assert!(t.column("c", 2).is_err());
    }
}
