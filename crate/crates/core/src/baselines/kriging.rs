use alloc::format;
use alloc::vec::Vec;

use super::variogram::VariogramModel;
use crate::datagen::Location;
use crate::numerics::{DenseMatrix, LuFactor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KrigingMode {
    /// Unknown constant mean, eliminated by a Lagrange constraint.
    #[default]
    Ordinary,
    /// Known mean, taken as the training average.
    Simple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Test points whose variance came out negative and was set to zero.
    pub clamped: usize,
}

/// Factorized kriging system, built once and reused for every target.
///
/// Covariances are divided by the total sill before factoring so the
/// constraint row and the covariance block have comparable scale.
#[derive(Debug, Clone)]
pub struct Kriging {
    locations: Vec<Location>,
    values: Vec<f64>,
    vg: VariogramModel,
    mode: KrigingMode,
    mean: f64,
    lu: LuFactor,
}

impl Kriging {
    pub fn new(locations: &[Location], values: &[f64], vg: VariogramModel, mode: KrigingMode) -> Result<Self> {
        vg.validate()?;
        if locations.is_empty() {
            return Err(Error::EmptyInput("kriging needs training data"));
        }
        if locations.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} locations, {} values", locations.len(), values.len())));
        }
        let n = locations.len();
        let size = match mode {
            KrigingMode::Ordinary => n + 1,
            KrigingMode::Simple => n,
        };
        let sill = vg.sill();
        let build = |jitter: f64| {
            DenseMatrix::from_fn(size, size, |i, j| match (i < n, j < n) {
                (true, true) => {
                    vg.covariance(locations[i].distance(&locations[j])) / sill + if i == j { jitter } else { 0.0 }
                }
                (true, false) | (false, true) => 1.0,
                (false, false) => 0.0,
            })
        };
        let lu = match LuFactor::new(&build(0.0)) {
            Ok(lu) => lu,
            Err(Error::Singular) => LuFactor::new(&build(1e-8))?,
            Err(e) => return Err(e),
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        Ok(Self { locations: locations.to_vec(), values: values.to_vec(), vg, mode, mean, lu })
    }

    fn rhs(&self, target: &Location) -> Vec<f64> {
        let sill = self.vg.sill();
        let mut c: Vec<f64> = self.locations.iter().map(|l| self.vg.covariance(l.distance(target)) / sill).collect();
        if self.mode == KrigingMode::Ordinary {
            c.push(1.0);
        }
        c
    }

    /// Kriging weights and (for ordinary kriging) the scaled Lagrange multiplier.
    pub fn weights(&self, target: &Location) -> Result<(Vec<f64>, f64)> {
        let mut w = self.lu.solve(&self.rhs(target))?;
        let mu = if self.mode == KrigingMode::Ordinary { w.pop().unwrap_or(0.0) } else { 0.0 };
        Ok((w, mu))
    }

    /// BLUP mean and kriging variance at one target.
    pub fn predict_one(&self, target: &Location) -> Result<(f64, f64)> {
        let c = self.rhs(target);
        let (w, mu) = self.weights(target)?;
        let wc: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
        let mean = match self.mode {
            KrigingMode::Ordinary => w.iter().zip(&self.values).map(|(a, b)| a * b).sum(),
            KrigingMode::Simple => {
                self.mean + w.iter().zip(&self.values).map(|(a, b)| a * (b - self.mean)).sum::<f64>()
            }
        };
        Ok((mean, self.vg.sill() * (1.0 - wc - mu)))
    }

    pub fn predict(&self, targets: &[Location]) -> Result<KrigingPrediction> {
        let mut out = KrigingPrediction {
            mean: Vec::with_capacity(targets.len()),
            variance: Vec::with_capacity(targets.len()),
            clamped: 0,
        };
        for t in targets {
            let (m, v) = self.predict_one(t)?;
            if !m.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite("kriging prediction"));
            }
            out.mean.push(m);
            if v < 0.0 {
                out.clamped += 1;
            }
            out.variance.push(v.max(0.0));
        }
        Ok(out)
    }
}

/// Ordinary kriging of `values` at `targets`.
pub fn krige(
    locations: &[Location],
    values: &[f64],
    targets: &[Location],
    vg: VariogramModel,
) -> Result<KrigingPrediction> {
    Kriging::new(locations, values, vg, KrigingMode::Ordinary)?.predict(targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(xs: &[f64]) -> Vec<Location> {
        xs.iter().map(|&x| Location(vec![x])).collect()
    }

    #[test]
    fn exact_interpolation_without_nugget() {
        let locs = line(&[0.0, 0.1, 0.35, 0.6, 0.9]);
        let vals = [1.0, -0.5, 2.0, 0.3, 0.0];
        let vg = VariogramModel { nugget: 0.0, partial_sill: 1.2, range: 0.2 };
        let p = krige(&locs, &vals, &locs, vg).unwrap();
        for ((m, v), y) in p.mean.iter().zip(&p.variance).zip(&vals) {
            assert!((m - y).abs() < 1e-8);
            assert!(*v < 1e-8);
        }
    }

    #[test]
    fn one_point_is_constant() {
        let vg = VariogramModel { nugget: 0.1, partial_sill: 1.0, range: 0.3 };
        let p = krige(&line(&[0.5]), &[3.25], &line(&[0.0, 0.5, 7.0]), vg).unwrap();
        assert!(p.mean.iter().all(|&m| (m - 3.25).abs() < 1e-12));
        assert!(p.variance.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn matches_direct_solve_on_three_points() {
        // 4×4 bordered system solved by Cramer's rule
        let xs = [0.0, 0.4, 1.0];
        let vg = VariogramModel { nugget: 0.0, partial_sill: 2.0, range: 0.5 };
        let target = 0.7;
        let c = |a: f64, b: f64| 2.0 * libm::exp(-libm::fabs(a - b) / 0.5);
        let a = [
            [c(xs[0], xs[0]), c(xs[0], xs[1]), c(xs[0], xs[2]), 1.0],
            [c(xs[1], xs[0]), c(xs[1], xs[1]), c(xs[1], xs[2]), 1.0],
            [c(xs[2], xs[0]), c(xs[2], xs[1]), c(xs[2], xs[2]), 1.0],
            [1.0, 1.0, 1.0, 0.0],
        ];
        let b = [c(xs[0], target), c(xs[1], target), c(xs[2], target), 1.0];
        fn det3(m: [[f64; 3]; 3]) -> f64 {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        fn det4(m: [[f64; 4]; 4]) -> f64 {
            (0..4)
                .map(|k| {
                    let minor = core::array::from_fn(|i| {
                        let row = m[i + 1];
                        let cols: Vec<f64> = (0..4).filter(|&j| j != k).map(|j| row[j]).collect();
                        [cols[0], cols[1], cols[2]]
                    });
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * m[0][k] * det3(minor)
                })
                .sum()
        }
        let d = det4(a);
        let sol: Vec<f64> = (0..4)
            .map(|k| {
                let mut m = a;
                for i in 0..4 {
                    m[i][k] = b[i];
                }
                det4(m) / d
            })
            .collect();
        let vals = [1.0, 3.0, -2.0];
        let expect_mean: f64 = (0..3).map(|i| sol[i] * vals[i]).sum();
        let expect_var = 2.0 - (0..3).map(|i| sol[i] * b[i]).sum::<f64>() - sol[3];
        let k = Kriging::new(&line(&xs), &vals, vg, KrigingMode::Ordinary).unwrap();
        let (m, v) = k.predict_one(&Location(vec![target])).unwrap();
        assert!((m - expect_mean).abs() < 1e-10);
        assert!((v - expect_var).abs() < 1e-10);
        let (w, _) = k.weights(&Location(vec![target])).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn simple_kriging_reverts_to_mean_far_away() {
        let vg = VariogramModel { nugget: 0.0, partial_sill: 1.0, range: 0.1 };
        let k = Kriging::new(&line(&[0.0, 0.2]), &[1.0, 3.0], vg, KrigingMode::Simple).unwrap();
        let (m, v) = k.predict_one(&Location(vec![50.0])).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_sites_need_jitter_or_nugget() {
        let vg = VariogramModel { nugget: 0.0, partial_sill: 1.0, range: 0.3 };
        let p = krige(&line(&[0.2, 0.2, 0.5]), &[1.0, 1.0, 2.0], &line(&[0.3]), vg).unwrap();
        assert!(p.mean[0].is_finite());
    }
}
