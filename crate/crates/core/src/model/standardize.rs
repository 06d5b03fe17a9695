use alloc::vec::Vec;

use crate::numerics::DenseMatrix;

/// Column-wise affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant columns get 1.
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DenseMatrix) -> Self {
        let (n, d) = (x.rows(), x.cols());
        let mut mean = alloc::vec![0.0; d];
        let mut sd = alloc::vec![0.0; d];
        if n == 0 {
            return Self { mean, sd: alloc::vec![1.0; d] };
        }
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for i in 0..n {
            for ((s, v), m) in sd.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in sd.iter_mut() {
            *s = libm::sqrt(*s / n as f64);
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Self { mean, sd }
    }

    /// Identity transform for `d` columns.
    pub fn identity(d: usize) -> Self {
        Self { mean: alloc::vec![0.0; d], sd: alloc::vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.sd).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - self.mean[j]) / self.sd[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_columns() {
        let x = DenseMatrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, [2.0, 5.0]);
        assert_eq!(s.sd, [1.0, 1.0]);
        let z = s.apply(&x);
        assert_eq!(z.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
    }
}
