//! Dataset CSV: a header row of typed column names, then one row per site.
//!
//! Column names carry a role prefix: `s:<axis>` for coordinates (at least
//! one), `z:<name>` for covariates, and `binary:<name>`, `count:<name>` or
//! `continuous:<name>` for outcomes. An empty outcome cell is a missing
//! response; coordinates and covariates must always be present.
//!
//! ```text
//! s:x,s:y,z:elevation,binary:infected,count:visits,continuous:bmi
//! 0.12,0.80,1.5,1,3,-0.4
//! 0.55,0.31,0.2,,0,1.1
//! ```

use mdgp_core::datagen::{Dataset, Location, OutcomeKind, OutcomeSpec};
use mdgp_core::numerics::DenseMatrix;

use super::{csv_line, fmt_f64, parse_f64, reader, record_line};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Coord,
    Covariate,
    Outcome(OutcomeKind),
}

/// A dataset together with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub dataset: Dataset,
    pub coord_names: Vec<String>,
    pub covariate_names: Vec<String>,
}

fn parse_header(field: &str) -> Result<(Role, String)> {
    let (prefix, name) =
        field.split_once(':').ok_or_else(|| Error::Header(format!("column `{field}` lacks a role prefix")))?;
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Header(format!("column `{field}` needs a name without whitespace")));
    }
    let role = match prefix {
        "s" => Role::Coord,
        "z" => Role::Covariate,
        other => Role::Outcome(
            OutcomeKind::parse(other).ok_or_else(|| Error::Header(format!("unknown column role `{other}`")))?,
        ),
    };
    Ok((role, name.to_string()))
}

pub fn parse_dataset(text: &str) -> Result<CsvDataset> {
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    let roles: Vec<(Role, String)> = header.iter().map(parse_header).collect::<Result<_>>()?;
    let coord_names: Vec<String> = roles.iter().filter(|r| r.0 == Role::Coord).map(|r| r.1.clone()).collect();
    let covariate_names: Vec<String> = roles.iter().filter(|r| r.0 == Role::Covariate).map(|r| r.1.clone()).collect();
    let outcomes: Vec<OutcomeSpec> = roles
        .iter()
        .filter_map(|(role, name)| match role {
            Role::Outcome(kind) => Some(OutcomeSpec::new(name.clone(), *kind)),
            _ => None,
        })
        .collect();
    if coord_names.is_empty() {
        return Err(Error::Header("at least one `s:` coordinate column is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = header.iter().find(|h| !seen.insert(*h)) {
        return Err(Error::Header(format!("duplicate column `{dup}`")));
    }

    let mut locations = Vec::new();
    let mut covariates = Vec::new();
    let mut responses = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::MalformedRow {
                line: pos.as_ref().map_or(0, |p| p.line()),
                reason: format!("expected {expected_len} fields, found {len}"),
            },
            _ => Error::Csv(e),
        })?;
        let line = record_line(&rec);
        let mut coords = Vec::with_capacity(coord_names.len());
        let mut row = Vec::with_capacity(outcomes.len());
        for ((role, name), cell) in roles.iter().zip(rec.iter()) {
            let column = header_name(role, name);
            match role {
                Role::Coord => coords.push(parse_f64(cell, line, &column)?),
                Role::Covariate => covariates.push(parse_f64(cell, line, &column)?),
                Role::Outcome(kind) => {
                    if cell.is_empty() {
                        row.push(None);
                        continue;
                    }
                    let y = parse_f64(cell, line, &column)?;
                    if !kind.validate(y) {
                        return Err(Error::TypeViolation {
                            line,
                            column,
                            value: cell.to_string(),
                            expected: match kind {
                                OutcomeKind::Binary => "0 or 1",
                                OutcomeKind::Count => "a nonnegative integer",
                                OutcomeKind::Continuous => "a finite number",
                            },
                        });
                    }
                    row.push(Some(y));
                }
            }
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedRow { line, reason: "non-finite coordinate".into() });
        }
        locations.push(Location(coords));
        responses.push(row);
    }
    let n = locations.len();
    let features = if covariate_names.is_empty() {
        None
    } else {
        Some(DenseMatrix::from_vec(n, covariate_names.len(), covariates)?)
    };
    let dataset = Dataset::new(locations, outcomes, responses, features)?;
    Ok(CsvDataset { dataset, coord_names, covariate_names })
}

fn header_name(role: &Role, name: &str) -> String {
    match role {
        Role::Coord => format!("s:{name}"),
        Role::Covariate => format!("z:{name}"),
        Role::Outcome(k) => format!("{}:{name}", k.as_str()),
    }
}

pub fn read_dataset(path: &std::path::Path) -> Result<CsvDataset> {
    parse_dataset(&crate::error::read_to_string(path)?)
}

/// Default coordinate names: `x`, `y`, `z` for up to three axes, else `s0..`.
pub fn default_coord_names(dim: usize) -> Vec<String> {
    if dim <= 3 {
        ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect()
    } else {
        (0..dim).map(|k| format!("s{k}")).collect()
    }
}

pub fn format_dataset(data: &CsvDataset, comment: &str) -> String {
    let d = &data.dataset;
    let mut out = String::from(comment);
    let header = data
        .coord_names
        .iter()
        .map(|n| format!("s:{n}"))
        .chain(data.covariate_names.iter().map(|n| format!("z:{n}")))
        .chain(d.outcomes.iter().map(|o| format!("{}:{}", o.kind.as_str(), o.name)));
    out.push_str(&csv_line(header));
    for i in 0..d.len() {
        let coords = d.locations[i].0.iter().map(|&v| fmt_f64(v));
        let cov = (0..d.covariate_dim()).map(|k| fmt_f64(d.features.as_ref().map_or(0.0, |f| f.get(i, k))));
        let ys = d.responses[i].iter().map(|y| y.map(fmt_f64).unwrap_or_default());
        out.push_str(&csv_line(coords.chain(cov).chain(ys)));
    }
    out
}
