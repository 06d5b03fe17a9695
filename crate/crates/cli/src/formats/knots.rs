//! Knot and mask files.
//!
//! A knot CSV lists one knot per row under `s:` coordinate columns, the same
//! convention as datasets. A mask CSV lists the vertices of a closed polygon
//! in order under the header `x,y`; lattice knots outside it are dropped.

use mdgp_core::datagen::{KnotSet, Location};

use super::{csv_line, fmt_f64, parse_f64, reader, record_line};
use crate::{Error, Result};

pub fn parse_knots(text: &str) -> Result<KnotSet> {
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.iter().any(|h| !h.starts_with("s:")) {
        return Err(Error::Header("knot files use only `s:` coordinate columns".into()));
    }
    let mut knots = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let coords = rec.iter().zip(header.iter()).map(|(c, h)| parse_f64(c, line, h)).collect::<Result<Vec<_>>>()?;
        knots.push(Location(coords));
    }
    if knots.is_empty() {
        return Err(Error::Header("knot file has no rows".into()));
    }
    let dim = header.len();
    let bbox = (0..dim)
        .map(|d| knots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k.0[d]), hi.max(k.0[d]))))
        .collect();
    Ok(KnotSet { knots, grid: Vec::new(), bbox })
}

pub fn format_knots(knots: &KnotSet, comment: &str) -> String {
    let dim = knots.knots.first().map_or(0, Location::dim);
    let mut out = String::from(comment);
    out.push_str(&csv_line(super::dataset::default_coord_names(dim).iter().map(|n| format!("s:{n}"))));
    for k in &knots.knots {
        out.push_str(&csv_line(k.0.iter().map(|&v| fmt_f64(v))));
    }
    out
}

/// Closed planar polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    /// Even-odd ray casting; points on an edge may fall either way.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

pub fn parse_polygon(text: &str) -> Result<Polygon> {
    let mut rdr = reader(text);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(Error::Header("polygon files have exactly the columns x,y".into()));
    }
    let mut vertices = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        vertices.push((parse_f64(&rec[0], line, "x")?, parse_f64(&rec[1], line, "y")?));
    }
    if vertices.len() < 3 {
        return Err(Error::Header("a polygon needs at least 3 vertices".into()));
    }
    Ok(Polygon { vertices })
}
