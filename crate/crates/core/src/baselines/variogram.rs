use alloc::format;
use alloc::vec::Vec;

use crate::datagen::Location;
use crate::{Error, Result};

/// Exponential variogram `γ(h) = nugget + partial_sill · (1 − e^{−h/range})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramModel {
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.nugget >= 0.0 && self.partial_sill >= 0.0 && self.range > 0.0 && self.sill() > 0.0;
        if !ok || !self.sill().is_finite() || !self.range.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid variogram {self:?}")));
        }
        Ok(())
    }

    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    pub fn gamma(&self, h: f64) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        self.nugget + self.partial_sill * (1.0 - libm::exp(-h / self.range))
    }

    /// Covariance, with the nugget only at zero separation.
    pub fn covariance(&self, h: f64) -> f64 {
        let c = self.partial_sill * libm::exp(-h / self.range);
        if h == 0.0 {
            c + self.nugget
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    /// Bin midpoint.
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Largest pairwise distance, `O(n²)`.
pub fn max_pair_distance(locations: &[Location]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..locations.len() {
        for j in i + 1..locations.len() {
            m = m.max(locations[i].distance(&locations[j]));
        }
    }
    m
}

/// Method-of-moments semivariogram over `n_bins` equal-width bins on
/// `[0, max_dist]`; pairs beyond `max_dist` are ignored and empty bins dropped.
pub fn empirical_semivariogram(
    locations: &[Location],
    values: &[f64],
    n_bins: usize,
    max_dist: f64,
) -> Result<Vec<VariogramBin>> {
    if locations.len() != values.len() {
        return Err(Error::DimensionMismatch(format!("{} locations, {} values", locations.len(), values.len())));
    }
    if locations.len() < 2 {
        return Err(Error::TooFewObservations("semivariogram needs at least 2 observations".into()));
    }
    if !(max_dist > 0.0) || n_bins == 0 {
        return Err(Error::InvalidConfig("semivariogram needs max_dist > 0 and at least one bin".into()));
    }
    let width = max_dist / n_bins as f64;
    let mut sums = alloc::vec![0.0; n_bins];
    let mut counts = alloc::vec![0usize; n_bins];
    for i in 0..locations.len() {
        for j in i + 1..locations.len() {
            let h = locations[i].distance(&locations[j]);
            if h > max_dist {
                continue;
            }
            let b = ((h / width) as usize).min(n_bins - 1);
            let d = values[i] - values[j];
            sums[b] += d * d;
            counts[b] += 1;
        }
    }
    let bins: Vec<VariogramBin> = (0..n_bins)
        .filter(|&b| counts[b] > 0)
        .map(|b| VariogramBin {
            lag: (b as f64 + 0.5) * width,
            gamma: sums[b] / (2.0 * counts[b] as f64),
            pairs: counts[b],
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::TooFewObservations("every semivariogram bin is empty".into()));
    }
    Ok(bins)
}

/// Weighted SSE and the clamped linear parameters for a fixed range.
fn fit_linear(bins: &[VariogramBin], range: f64) -> (f64, f64, f64) {
    let rows: Vec<(f64, f64, f64)> =
        bins.iter().map(|b| (b.pairs as f64 / (b.lag * b.lag), 1.0 - libm::exp(-b.lag / range), b.gamma)).collect();
    let (mut sw, mut sg, mut sgg, mut sy, mut sgy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(w, g, y) in &rows {
        sw += w;
        sg += w * g;
        sgg += w * g * g;
        sy += w * y;
        sgy += w * g * y;
    }
    let det = sw * sgg - sg * sg;
    let (mut a, mut b) =
        if det > 1e-12 * sw * sgg { ((sgg * sy - sg * sgy) / det, (sw * sgy - sg * sy) / det) } else { (sy / sw, 0.0) };
    if a < 0.0 {
        a = 0.0;
        b = if sgg > 0.0 { (sgy / sgg).max(0.0) } else { 0.0 };
    }
    if b < 0.0 {
        b = 0.0;
        a = (sy / sw).max(0.0);
    }
    let sse = rows.iter().map(|&(w, g, y)| w * (y - a - b * g) * (y - a - b * g)).sum();
    (sse, a, b)
}

const GRID_POINTS: usize = 60;
const REFINE_POINTS: usize = 21;
const REFINE_ROUNDS: usize = 3;

/// Weighted least squares (weights `pairs / lag²`) over a log grid of ranges
/// spanning half the smallest lag to twice the largest, refined three times
/// around the best point; nugget and partial sill are solved in closed form
/// at each range and clamped to be nonnegative.
pub fn fit_variogram(bins: &[VariogramBin]) -> Result<VariogramModel> {
    if bins.len() < 3 {
        return Err(Error::TooFewObservations(format!("variogram fit needs 3 nonempty bins, got {}", bins.len())));
    }
    let h_min = bins.iter().map(|b| b.lag).fold(f64::INFINITY, f64::min);
    let h_max = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    if bins.iter().all(|b| b.gamma == bins[0].gamma) && bins[0].gamma == 0.0 {
        return Ok(VariogramModel { nugget: 1e-10, partial_sill: 0.0, range: h_max });
    }
    let (mut lo, mut hi) = (libm::log(0.5 * h_min), libm::log(2.0 * h_max));
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let mut points = GRID_POINTS;
    for _ in 0..=REFINE_ROUNDS {
        let step = (hi - lo) / (points - 1) as f64;
        let mut best_k = 0;
        for k in 0..points {
            let r = libm::exp(lo + step * k as f64);
            let (sse, a, b) = fit_linear(bins, r);
            if sse < best.0 {
                best = (sse, a, b, r);
                best_k = k;
            }
        }
        let centre = lo + step * best_k as f64;
        lo = centre - step;
        hi = centre + step;
        points = REFINE_POINTS;
    }
    let (_, nugget, partial_sill, range) = best;
    let vg = VariogramModel { nugget, partial_sill, range };
    if !(vg.sill() > 0.0) {
        return Ok(VariogramModel { nugget: 1e-10, partial_sill: 0.0, range: h_max });
    }
    Ok(vg)
}
