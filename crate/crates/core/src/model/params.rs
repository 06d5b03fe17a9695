use alloc::vec;
use alloc::vec::Vec;

use super::config::NetworkConfig;
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
struct LayerSlot {
    w: usize,
    rows: usize,
    cols: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct HeadSlot {
    w: usize,
    len: usize,
    b: usize,
}

/// All weights and biases, stored contiguously in declared order:
/// for each hidden layer `W_ℓ` (row-major) then `b_ℓ`; then for each head
/// its weight row followed by its scalar bias.
///
/// The same values are the means of the dropout variational posterior, and
/// the type doubles as the gradient and optimizer-moment container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: Vec<f64>,
    layers: Vec<LayerSlot>,
    heads: Vec<HeadSlot>,
}

impl Params {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let mut offset = 0;
        let mut layers = Vec::with_capacity(cfg.depth());
        for (l, &rows) in cfg.hidden_widths.iter().enumerate() {
            let cols = cfg.layer_in_dim(l);
            layers.push(LayerSlot { w: offset, rows, cols, b: offset + rows * cols });
            offset += rows * cols + rows;
        }
        let len = cfg.head_input_dim();
        let heads = (0..cfg.heads.len())
            .map(|_| {
                let slot = HeadSlot { w: offset, len, b: offset + len };
                offset += len + 1;
                slot
            })
            .collect();
        Self { values: vec![0.0; offset], layers, heads }
    }

    /// Same layout as `self`, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], layers: self.layers.clone(), heads: self.heads.clone() }
    }

    /// Whether the layout matches `cfg`.
    pub fn fits(&self, cfg: &NetworkConfig) -> bool {
        let z = Self::zeros(cfg);
        z.layers == self.layers && z.heads == self.heads
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    /// `(rows, cols)` of hidden weight matrix `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layers[l].rows, self.layers[l].cols)
    }

    pub fn layer_w(&self, l: usize) -> &[f64] {
        let s = &self.layers[l];
        &self.values[s.w..s.w + s.rows * s.cols]
    }

    pub fn layer_w_mut(&mut self, l: usize) -> &mut [f64] {
        let s = &self.layers[l];
        let (start, end) = (s.w, s.w + s.rows * s.cols);
        &mut self.values[start..end]
    }

    pub fn layer_b(&self, l: usize) -> &[f64] {
        let s = &self.layers[l];
        &self.values[s.b..s.b + s.rows]
    }

    pub fn layer_b_mut(&mut self, l: usize) -> &mut [f64] {
        let s = &self.layers[l];
        let (start, end) = (s.b, s.b + s.rows);
        &mut self.values[start..end]
    }

    pub fn layer_matrix(&self, l: usize) -> DenseMatrix {
        let (r, c) = self.layer_shape(l);
        DenseMatrix::from_vec(r, c, self.layer_w(l).to_vec()).expect("layer slot shape")
    }

    pub fn head_w(&self, j: usize) -> &[f64] {
        let s = &self.heads[j];
        &self.values[s.w..s.w + s.len]
    }

    pub fn head_w_mut(&mut self, j: usize) -> &mut [f64] {
        let s = &self.heads[j];
        let (start, end) = (s.w, s.w + s.len);
        &mut self.values[start..end]
    }

    pub fn head_b(&self, j: usize) -> f64 {
        self.values[self.heads[j].b]
    }

    pub fn head_b_mut(&mut self, j: usize) -> &mut f64 {
        let b = self.heads[j].b;
        &mut self.values[b]
    }

    /// Replaces all values; `values.len()` must equal `self.len()`.
    pub fn set_values(&mut self, values: &[f64]) {
        self.values.copy_from_slice(values);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &Params) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{OutcomeKind, OutcomeSpec};
    use crate::model::Activation;

    #[test]
    fn layout_counts() {
        let cfg = NetworkConfig {
            input_dim: 3,
            hidden_widths: vec![4, 2],
            activation: Activation::Relu,
            hidden_keep: vec![1.0, 1.0],
            head_keep: vec![1.0, 1.0],
            heads: vec![OutcomeSpec::new("a", OutcomeKind::Binary), OutcomeSpec::new("b", OutcomeKind::Count)],
            n_train: 5,
            covariate_dim: 1,
        };
        let p = Params::zeros(&cfg);
        assert_eq!(p.len(), 4 * 3 + 4 + 2 * 4 + 2 + 2 * (3 + 1));
        assert_eq!(p.layer_shape(1), (2, 4));
        assert_eq!(p.head_w(1).len(), 3);
        assert!(p.fits(&cfg));
    }
}
