use alloc::format;
use alloc::vec::Vec;

use super::matrix::DenseMatrix;
use super::rng::RngStream;
use crate::{Error, Result};

/// Jitter added to the diagonal when a covariance is numerically degenerate.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// Lower Cholesky factor `L` with `L Lᵀ = a`.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if n == 0 || a.cols() != n {
        return Err(Error::DimensionMismatch(format!("cholesky of a {}x{} matrix", a.rows(), a.cols())));
    }
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(a.get(i, i).abs());
        for j in 0..i {
            let (x, y) = (a.get(i, j), a.get(j, i));
            let scale = x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
            if (x - y).abs() > 1e-10 * scale {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    let tol = n as f64 * 1e-12 * max_diag;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j);
        let pivot = a.get(j, j) - lj[..j].iter().map(|x| x * x).sum::<f64>();
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = libm::sqrt(pivot);
        l.set(j, j, d);
        for i in j + 1..n {
            let s: f64 = {
                let (li, lj) = (l.row(i), l.row(j));
                li[..j].iter().zip(&lj[..j]).map(|(x, y)| x * y).sum()
            };
            l.set(i, j, (a.get(i, j) - s) / d);
        }
    }
    Ok(l)
}

/// Cholesky that retries once with [`DEFAULT_JITTER`] on the diagonal.
pub fn cholesky_with_jitter(a: &DenseMatrix) -> Result<DenseMatrix> {
    match cholesky(a) {
        Err(Error::NotPositiveDefinite { .. }) => {
            let mut jittered = a.clone();
            for i in 0..a.rows() {
                jittered.set(i, i, a.get(i, i) + DEFAULT_JITTER);
            }
            cholesky(&jittered)
        }
        other => other,
    }
}

/// `mean + L z` with `z` standard normal draws from `rng`.
pub fn mvn_sample(mean: &[f64], chol_lower: &DenseMatrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    let n = mean.len();
    if chol_lower.rows() != n || chol_lower.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "mean of length {n} with a {}x{} factor",
            chol_lower.rows(),
            chol_lower.cols()
        )));
    }
    let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    Ok((0..n)
        .map(|i| {
            let row = chol_lower.row(i);
            mean[i] + row[..=i].iter().zip(&z).map(|(l, z)| l * z).sum::<f64>()
        })
        .collect())
}

/// Exponential covariance `sigma2 · exp(−distance / rho)`.
#[inline]
pub fn exp_cov(distance: f64, sigma2: f64, rho: f64) -> f64 {
    sigma2 * libm::exp(-distance / rho)
}

/// LU factorization with partial pivoting, reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!("LU of a {}x{} matrix", a.rows(), a.cols())));
        }
        let max_abs = a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = n as f64 * f64::EPSILON * max_abs;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, lu.get(k, k).abs());
            for i in k + 1..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if !(best > tol) {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                perm.swap(k, p);
            }
            let pivot = lu.get(k, k);
            for i in k + 1..n {
                let f = lu.get(i, k) / pivot;
                lu.set(i, k, f);
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu.get(i, j) - f * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!("rhs of length {} for a system of size {n}", b.len())));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reconstruct(l: &DenseMatrix) -> DenseMatrix {
        l.matmul(&l.transpose()).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(l, DenseMatrix::identity(2));
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = DenseMatrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let expected = [2.0, 0.0, 1.0, libm::sqrt(2.0)];
        for (x, y) in l.as_slice().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        // oracle: direct multiplication reproduces a
        let back = reconstruct(&l);
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_indefinite_fails() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotSymmetric(1, 0))));
    }

    #[test]
    fn jitter_rescues_zero_matrix() {
        let a = DenseMatrix::zeros(3, 3);
        assert!(cholesky(&a).is_err());
        let l = cholesky_with_jitter(&a).unwrap();
        assert!((l.get(0, 0) - libm::sqrt(DEFAULT_JITTER)).abs() < 1e-15);
    }

    #[test]
    fn mvn_zero_factor_returns_mean() {
        let mut rng = RngStream::new(1, 2);
        let x = mvn_sample(&[1.0, 1.0], &DenseMatrix::zeros(2, 2), &mut rng).unwrap();
        assert_eq!(x, [1.0, 1.0]);
    }

    #[test]
    fn mvn_identity_returns_raw_normals() {
        let mut a = RngStream::new(9, 0);
        let mut b = RngStream::new(9, 0);
        let x = mvn_sample(&[0.0; 5], &DenseMatrix::identity(5), &mut a).unwrap();
        let raw: Vec<f64> = (0..5).map(|_| b.normal()).collect();
        assert_eq!(x, raw);
    }

    #[test]
    fn mvn_dimension_mismatch() {
        let mut rng = RngStream::new(1, 2);
        assert!(mvn_sample(&[0.0; 3], &DenseMatrix::identity(2), &mut rng).is_err());
    }

    #[test]
    fn mvn_empirical_covariance_matches_model() {
        let sites: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let cov = DenseMatrix::from_fn(10, 10, |i, j| exp_cov((sites[i] - sites[j]).abs(), 1.0, 0.1));
        let l = cholesky(&cov).unwrap();
        let mut rng = RngStream::new(2024, 7);
        let draws = 5000;
        let mut acc = DenseMatrix::zeros(10, 10);
        let mut mean = [0.0; 10];
        let samples: Vec<Vec<f64>> = (0..draws).map(|_| mvn_sample(&[0.0; 10], &l, &mut rng).unwrap()).collect();
        for s in &samples {
            for i in 0..10 {
                mean[i] += s[i] / draws as f64;
            }
        }
        for s in &samples {
            for i in 0..10 {
                for j in 0..10 {
                    let v = acc.get(i, j) + (s[i] - mean[i]) * (s[j] - mean[j]) / (draws - 1) as f64;
                    acc.set(i, j, v);
                }
            }
        }
        for i in 0..10 {
            for j in 0..10 {
                assert!((acc.get(i, j) - cov.get(i, j)).abs() < 0.1, "({i},{j})");
            }
        }
    }

    #[test]
    fn exp_cov_values() {
        assert_eq!(exp_cov(0.0, 1.0, 0.1), 1.0);
        assert!((exp_cov(0.1, 1.0, 0.1) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(exp_cov(3.7, 0.0, 0.1), 0.0);
    }

    #[test]
    fn lu_solves_small_system() {
        let a = DenseMatrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let s = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(LuFactor::new(&s), Err(Error::Singular)));
    }

    proptest! {
        #[test]
        fn cholesky_recovers_factor(n in 1usize..=20, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0);
            let l = DenseMatrix::from_fn(n, n, |i, j| {
                if j < i { rng.normal() } else if i == j { 0.5 + rng.uniform() } else { 0.0 }
            });
            let a = reconstruct(&l);
            let got = cholesky(&a).unwrap();
            for (x, y) in got.as_slice().iter().zip(l.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
            }
            let back = reconstruct(&got);
            let mut err = 0.0;
            for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
                err += (x - y) * (x - y);
            }
            prop_assert!(libm::sqrt(err) <= 1e-8 * a.norm());
        }

        #[test]
        fn exp_cov_monotone(d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, rho in 0.01f64..2.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(exp_cov(lo, 1.3, rho) >= exp_cov(hi, 1.3, rho));
        }
    }

    #[test]
    fn exp_cov_continuous_at_zero() {
        assert!((exp_cov(1e-14, 2.0, 0.1) - 2.0).abs() < 1e-12);
    }
}
