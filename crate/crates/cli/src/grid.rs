//! Inverse-distance-weighted grid export for score maps. Presentation only:
//! nothing computed here feeds back into metrics.

use mdgp_core::datagen::Location;

use crate::{Error, Result};

pub const IDW_POWER: f64 = 2.0;
pub const IDW_NEIGHBOURS: usize = 12;

/// `resolution × resolution` grid over the bounding box of `points`, rows
/// ordered by y then x. Each node averages its `k` nearest points with
/// weights `d^-power`; a node on top of a point takes that point's value.
pub fn idw_grid(points: &[Location], values: &[f64], resolution: usize, power: f64, k: usize) -> Result<Vec<[f64; 3]>> {
    if points.len() != values.len() || points.is_empty() {
        return Err(Error::Config("grid export needs one value per point".into()));
    }
    if points.iter().any(|p| p.dim() != 2) {
        return Err(Error::Config("grid export needs 2-d locations".into()));
    }
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.0[0]);
        x1 = x1.max(p.0[0]);
        y0 = y0.min(p.0[1]);
        y1 = y1.max(p.0[1]);
    }
    let k = k.min(points.len()).max(1);
    let mut out = Vec::with_capacity(resolution * resolution);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for r in 0..resolution {
        let y = y0 + (y1 - y0) * r as f64 / (resolution - 1) as f64;
        for c in 0..resolution {
            let x = x0 + (x1 - x0) * c as f64 / (resolution - 1) as f64;
            let node = Location(vec![x, y]);
            dist.clear();
            dist.extend(points.iter().enumerate().map(|(i, p)| (p.distance(&node), i)));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let near = &dist[..k];
            let v = if near[0].0 == 0.0 {
                values[near[0].1]
            } else {
                let (num, den) = near.iter().fold((0.0, 0.0), |(n, d), &(h, i)| {
                    let w = h.powf(-power);
                    (n + w * values[i], d + w)
                });
                num / den
            };
            out.push([x, y, v]);
        }
    }
    Ok(out)
}
