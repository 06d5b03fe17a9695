use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::NetworkConfig;
use super::params::Params;
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Node-dropout masks: one 0/1 vector per hidden layer and, per head, one
/// over the shared representation entering that head.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub hidden: Vec<Vec<f64>>,
    pub heads: Vec<Vec<f64>>,
}

impl MaskSet {
    pub fn ones(cfg: &NetworkConfig) -> Self {
        Self {
            hidden: cfg.hidden_widths.iter().map(|&w| vec![1.0; w]).collect(),
            heads: vec![vec![1.0; cfg.repr_dim()]; cfg.heads.len()],
        }
    }

    /// Folds the masks into the parameters: rows of `W_ℓ` and entries of
    /// `b_ℓ` of dropped hidden units, and head weights on dropped inputs,
    /// are zeroed.
    pub fn apply_to(&self, params: &Params) -> Params {
        let mut out = params.clone();
        for (l, mask) in self.hidden.iter().enumerate() {
            let (_, cols) = out.layer_shape(l);
            for (i, &m) in mask.iter().enumerate() {
                if m == 0.0 {
                    out.layer_w_mut(l)[i * cols..(i + 1) * cols].fill(0.0);
                    out.layer_b_mut(l)[i] = 0.0;
                }
            }
        }
        for (j, mask) in self.heads.iter().enumerate() {
            let w = out.head_w_mut(j);
            for (wi, &m) in w.iter_mut().zip(mask) {
                *wi *= m;
            }
        }
        out
    }
}

/// Draws every mask entry as Bernoulli(keep) of its layer or head.
pub fn sample_masks(cfg: &NetworkConfig, rng: &mut RngStream) -> MaskSet {
    let hidden = cfg
        .hidden_widths
        .iter()
        .zip(&cfg.hidden_keep)
        .map(|(&w, &p)| (0..w).map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect())
        .collect();
    let k = cfg.repr_dim();
    let heads =
        cfg.head_keep.iter().map(|&p| (0..k).map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect()).collect();
    MaskSet { hidden, heads }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Pre-activations `f_ℓ`.
    pub pre: Vec<Vec<f64>>,
    /// Gated post-activations `φ_ℓ`.
    pub post: Vec<Vec<f64>>,
    /// Linear predictors `η_j` (link scale).
    pub eta: Vec<f64>,
}

impl ForwardTrace {
    /// Shared representation `H(s)`; `None` without hidden layers.
    pub fn shared(&self) -> Option<&[f64]> {
        self.post.last().map(Vec::as_slice)
    }
}

enum Gates<'a> {
    Masks(&'a MaskSet),
    Expected,
}

/// Masked forward pass. `input` holds the spatial features followed by the
/// covariates.
pub fn forward(cfg: &NetworkConfig, params: &Params, masks: &MaskSet, input: &[f64]) -> Result<ForwardTrace> {
    run(cfg, params, Gates::Masks(masks), input)
}

/// Mask-free pass with every gated activation scaled by its keep
/// probability: the deterministic fitted predictor.
pub fn forward_expected(cfg: &NetworkConfig, params: &Params, input: &[f64]) -> Result<ForwardTrace> {
    run(cfg, params, Gates::Expected, input)
}

fn run(cfg: &NetworkConfig, params: &Params, gates: Gates<'_>, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != cfg.row_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} for a network expecting {}",
            input.len(),
            cfg.row_dim()
        )));
    }
    if !params.fits(cfg) {
        return Err(Error::DimensionMismatch("parameters do not match network config".into()));
    }
    let (spatial, covariates) = input.split_at(cfg.input_dim);
    let mut pre = Vec::with_capacity(cfg.depth());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(cfg.depth());
    for l in 0..cfg.depth() {
        let prev = if l == 0 { spatial } else { post[l - 1].as_slice() };
        let (rows, cols) = params.layer_shape(l);
        let w = params.layer_w(l);
        let b = params.layer_b(l);
        let mut a = Vec::with_capacity(rows);
        let mut phi = Vec::with_capacity(rows);
        for i in 0..rows {
            let z: f64 = w[i * cols..(i + 1) * cols].iter().zip(prev).map(|(x, y)| x * y).sum::<f64>() + b[i];
            let gate = match &gates {
                Gates::Masks(m) => m.hidden[l][i],
                Gates::Expected => cfg.hidden_keep[l],
            };
            a.push(z);
            phi.push(cfg.activation.apply(z) * gate);
        }
        pre.push(a);
        post.push(phi);
    }
    let shared = post.last().map_or(spatial, Vec::as_slice);
    let k = shared.len();
    let mut eta = Vec::with_capacity(cfg.heads.len());
    for j in 0..cfg.heads.len() {
        let w = params.head_w(j);
        let mut s = params.head_b(j);
        match &gates {
            Gates::Masks(m) => {
                for ((wi, hi), gi) in w[..k].iter().zip(shared).zip(&m.heads[j]) {
                    s += wi * hi * gi;
                }
            }
            Gates::Expected => {
                let keep = cfg.head_keep[j];
                for (wi, hi) in w[..k].iter().zip(shared) {
                    s += wi * hi * keep;
                }
            }
        }
        for (wi, ci) in w[k..].iter().zip(covariates) {
            s += wi * ci;
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("linear predictor"));
        }
        eta.push(s);
    }
    Ok(ForwardTrace { pre, post, eta })
}
