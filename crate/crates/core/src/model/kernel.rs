use alloc::format;

use super::config::Activation;
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

/// Empirical layer covariance `(1/width) · A Aᵀ`, `A = act(Φ Wᵀ + 1 bᵀ)`.
///
/// `phi_prev` is `N × k_{ℓ−1}`, `w` is `k_ℓ × k_{ℓ−1}`. Used as a diagnostic
/// of the Gaussian-process kernel a wide layer induces.
pub fn layer_kernel(
    phi_prev: &DenseMatrix,
    w: &DenseMatrix,
    b: &[f64],
    activation: Activation,
    width: usize,
) -> Result<DenseMatrix> {
    if phi_prev.cols() != w.cols() || w.rows() != b.len() || width == 0 {
        return Err(Error::DimensionMismatch(format!(
            "Φ {}x{}, W {}x{}, b {}",
            phi_prev.rows(),
            phi_prev.cols(),
            w.rows(),
            w.cols(),
            b.len()
        )));
    }
    let mut a = phi_prev.matmul(&w.transpose())?;
    for i in 0..a.rows() {
        for (v, bj) in a.row_mut(i).iter_mut().zip(b) {
            *v = activation.apply(*v + bj);
        }
    }
    let mut k = a.matmul(&a.transpose())?;
    let inv = 1.0 / width as f64;
    for i in 0..k.rows() {
        k.row_mut(i).iter_mut().for_each(|v| *v *= inv);
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn duplicate_rows_give_equal_entries() {
        let phi = DenseMatrix::from_rows(&[[0.3, -1.0], [0.3, -1.0]]).unwrap();
        let w = DenseMatrix::from_rows(&[[1.0, 0.5], [-0.2, 0.4], [0.9, 0.1]]).unwrap();
        let k = layer_kernel(&phi, &w, &[0.1, 0.0, -0.3], Activation::Tanh, 3).unwrap();
        assert_eq!(k.get(0, 0), k.get(1, 1));
        assert_eq!(k.get(0, 1), k.get(0, 0));
        assert_eq!(k.get(1, 0), k.get(0, 1));
    }

    #[test]
    fn zero_weights_zero_kernel() {
        let phi = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let k = layer_kernel(&phi, &DenseMatrix::zeros(4, 1), &[0.0; 4], Activation::Relu, 4).unwrap();
        assert!(k.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wide_limit_is_stable_across_draws() {
        let width = 10_000;
        let phi = DenseMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let estimates: Vec<DenseMatrix> = (0..4)
            .map(|seed| {
                let mut rng = RngStream::new(seed, 99);
                let w = DenseMatrix::from_fn(width, 2, |_, _| rng.normal());
                layer_kernel(&phi, &w, &vec![0.0; width], Activation::Tanh, width).unwrap()
            })
            .collect();
        let pooled: Vec<f64> = (0..4).map(|e| estimates.iter().map(|k| k.as_slice()[e]).sum::<f64>() / 4.0).collect();
        for k in &estimates {
            for (x, m) in k.as_slice().iter().zip(&pooled) {
                assert!((x - m).abs() / m.abs() < 0.05, "{x} vs pooled {m}");
            }
        }
    }
}
