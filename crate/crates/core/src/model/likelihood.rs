use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::NetworkConfig;
use super::forward::{forward, forward_expected, MaskSet};
use super::params::Params;
use crate::datagen::{OutcomeKind, OutcomeSpec};
use crate::numerics::special::{ln_factorial, logistic, softplus};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Negative log-likelihood of one observed cell.
#[inline]
pub fn cell_nll(kind: OutcomeKind, y: f64, eta: f64, sigma2: f64) -> f64 {
    match kind {
        OutcomeKind::Binary => softplus(eta) - y * eta,
        OutcomeKind::Count => libm::exp(eta) - y * eta + ln_factorial(y),
        OutcomeKind::Continuous => {
            let r = y - eta;
            r * r / (2.0 * sigma2) + HALF_LN_TWO_PI + 0.5 * libm::log(sigma2)
        }
    }
}

/// Derivative of [`cell_nll`] with respect to `eta`.
#[inline]
pub fn cell_nll_grad(kind: OutcomeKind, y: f64, eta: f64, sigma2: f64) -> f64 {
    match kind {
        OutcomeKind::Binary => logistic(eta) - y,
        OutcomeKind::Count => libm::exp(eta) - y,
        OutcomeKind::Continuous => (eta - y) / sigma2,
    }
}

fn check_cell(spec: &OutcomeSpec, y: f64) -> Result<()> {
    if spec.kind.validate(y) {
        Ok(())
    } else {
        Err(Error::InvalidResponse { outcome: spec.name.clone(), value: y })
    }
}

/// Summed NLL over the observed cells of one location, with unit Gaussian
/// variance. Missing cells contribute nothing.
pub fn nll(eta: &[f64], y: &[Option<f64>], specs: &[OutcomeSpec]) -> Result<f64> {
    if eta.len() != specs.len() || y.len() != specs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictors and {} responses for {} outcomes",
            eta.len(),
            y.len(),
            specs.len()
        )));
    }
    let mut total = 0.0;
    for ((&e, cell), spec) in eta.iter().zip(y).zip(specs) {
        if let Some(v) = *cell {
            check_cell(spec, v)?;
            total += cell_nll(spec.kind, v, e, 1.0);
        }
    }
    Ok(total)
}

/// Network-ready training rows: inputs are standardized spatial features
/// followed by covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: DenseMatrix,
    pub responses: Vec<Vec<Option<f64>>>,
}

impl TrainingSet {
    pub fn new(inputs: DenseMatrix, responses: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if inputs.rows() != responses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input rows for {} response rows",
                inputs.rows(),
                responses.len()
            )));
        }
        Ok(Self { inputs, responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn validate_for(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.inputs.cols() != cfg.row_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} input columns for a network expecting {}",
                self.inputs.cols(),
                cfg.row_dim()
            )));
        }
        for row in &self.responses {
            if row.len() != cfg.heads.len() {
                return Err(Error::DimensionMismatch("response row length differs from head count".into()));
            }
            for (cell, spec) in row.iter().zip(&cfg.heads) {
                if let Some(v) = *cell {
                    check_cell(spec, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Rows of a [`TrainingSet`] forming one minibatch.
pub type Batch<'a> = &'a [usize];

/// Weight-decay term `Σ λ_ℓ (‖W_ℓ‖² + ‖b_ℓ‖²) + Σ λ_j (‖w_j‖² + b_j²)`.
pub fn penalty(cfg: &NetworkConfig, params: &Params) -> f64 {
    let sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
    let mut total = 0.0;
    for l in 0..cfg.depth() {
        total += cfg.lambda_hidden(l) * (sq(params.layer_w(l)) + sq(params.layer_b(l)));
    }
    for j in 0..cfg.heads.len() {
        let b = params.head_b(j);
        total += cfg.lambda_head(j) * (sq(params.head_w(j)) + b * b);
    }
    total
}

fn add_penalty_grad(cfg: &NetworkConfig, params: &Params, g: &mut Params) {
    for l in 0..cfg.depth() {
        let lam2 = 2.0 * cfg.lambda_hidden(l);
        for (gi, wi) in g.layer_w_mut(l).iter_mut().zip(params.layer_w(l)) {
            *gi += lam2 * wi;
        }
        for (gi, bi) in g.layer_b_mut(l).iter_mut().zip(params.layer_b(l)) {
            *gi += lam2 * bi;
        }
    }
    for j in 0..cfg.heads.len() {
        let lam2 = 2.0 * cfg.lambda_head(j);
        for (gi, wi) in g.head_w_mut(j).iter_mut().zip(params.head_w(j)) {
            *gi += lam2 * wi;
        }
        *g.head_b_mut(j) += lam2 * params.head_b(j);
    }
}

/// Penalized objective on a batch: NLL scaled by `n_train / |batch|` plus
/// the dropout-matched weight decay.
pub fn loss(cfg: &NetworkConfig, params: &Params, masks: &MaskSet, set: &TrainingSet, batch: Batch<'_>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    let mut total = 0.0;
    for &i in batch {
        let t = forward(cfg, params, masks, set.inputs.row(i))?;
        total += nll(&t.eta, &set.responses[i], &cfg.heads)?;
    }
    Ok(cfg.n_train as f64 / batch.len() as f64 * total + penalty(cfg, params))
}

/// Exact gradient of [`loss`] with the masks held fixed.
pub fn grad(
    cfg: &NetworkConfig,
    params: &Params,
    masks: &MaskSet,
    set: &TrainingSet,
    batch: Batch<'_>,
) -> Result<Params> {
    loss_and_grad(cfg, params, core::slice::from_ref(masks), set, batch).map(|(_, g)| g)
}

/// Loss and gradient in one pass. `masks` holds either a single mask set
/// shared by the batch or one per batch row.
pub fn loss_and_grad(
    cfg: &NetworkConfig,
    params: &Params,
    masks: &[MaskSet],
    set: &TrainingSet,
    batch: Batch<'_>,
) -> Result<(f64, Params)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    if masks.len() != 1 && masks.len() != batch.len() {
        return Err(Error::DimensionMismatch(format!("{} mask sets for a batch of {}", masks.len(), batch.len())));
    }
    let mut g = params.zeros_like();
    let mut total = 0.0;
    let k = cfg.repr_dim();
    let mut d_eta = vec![0.0; cfg.heads.len()];
    for (r, &i) in batch.iter().enumerate() {
        let m = if masks.len() == 1 { &masks[0] } else { &masks[r] };
        let x = set.inputs.row(i);
        let t = forward(cfg, params, m, x)?;
        let y = &set.responses[i];
        total += nll(&t.eta, y, &cfg.heads)?;
        for (j, spec) in cfg.heads.iter().enumerate() {
            d_eta[j] = y[j].map_or(0.0, |v| cell_nll_grad(spec.kind, v, t.eta[j], 1.0));
        }
        let (spatial, covariates) = x.split_at(cfg.input_dim);
        let shared: &[f64] = t.post.last().map_or(spatial, Vec::as_slice);
        let mut d_phi = vec![0.0; k];
        for (j, &de) in d_eta.iter().enumerate() {
            if de == 0.0 {
                continue;
            }
            let w = params.head_w(j);
            let mask = &m.heads[j];
            {
                let gw = g.head_w_mut(j);
                for a in 0..k {
                    gw[a] += de * shared[a] * mask[a];
                }
                for (gc, c) in gw[k..].iter_mut().zip(covariates) {
                    *gc += de * c;
                }
            }
            *g.head_b_mut(j) += de;
            for a in 0..k {
                d_phi[a] += de * w[a] * mask[a];
            }
        }
        for l in (0..cfg.depth()).rev() {
            let (rows, cols) = params.layer_shape(l);
            let prev: &[f64] = if l == 0 { spatial } else { &t.post[l - 1] };
            let d_pre: Vec<f64> =
                (0..rows).map(|a| d_phi[a] * m.hidden[l][a] * cfg.activation.derivative(t.pre[l][a])).collect();
            {
                let gw = g.layer_w_mut(l);
                for (a, &dp) in d_pre.iter().enumerate() {
                    if dp != 0.0 {
                        for (gv, pv) in gw[a * cols..(a + 1) * cols].iter_mut().zip(prev) {
                            *gv += dp * pv;
                        }
                    }
                }
            }
            for (gb, dp) in g.layer_b_mut(l).iter_mut().zip(&d_pre) {
                *gb += dp;
            }
            if l > 0 {
                let w = params.layer_w(l);
                let mut next = vec![0.0; cols];
                for (a, &dp) in d_pre.iter().enumerate() {
                    if dp != 0.0 {
                        for (nv, wv) in next.iter_mut().zip(&w[a * cols..(a + 1) * cols]) {
                            *nv += dp * wv;
                        }
                    }
                }
                d_phi = next;
            }
        }
    }
    let scale = cfg.n_train as f64 / batch.len() as f64;
    g.scale(scale);
    add_penalty_grad(cfg, params, &mut g);
    Ok((scale * total + penalty(cfg, params), g))
}

/// Residual variance `(1/N_j) Σ (y − η̂)²` of each continuous head under the
/// deterministic fitted predictor; `None` for other heads.
pub fn estimate_sigma2(cfg: &NetworkConfig, params: &Params, set: &TrainingSet) -> Result<Vec<Option<f64>>> {
    let mut sums = vec![0.0; cfg.heads.len()];
    let mut counts = vec![0usize; cfg.heads.len()];
    let continuous: Vec<bool> = cfg.heads.iter().map(|h| h.kind == OutcomeKind::Continuous).collect();
    if !continuous.iter().any(|&c| c) {
        return Ok(vec![None; cfg.heads.len()]);
    }
    for (i, row) in set.responses.iter().enumerate() {
        if !row.iter().zip(&continuous).any(|(c, &k)| k && c.is_some()) {
            continue;
        }
        let t = forward_expected(cfg, params, set.inputs.row(i))?;
        for j in 0..cfg.heads.len() {
            if let (true, Some(y)) = (continuous[j], row[j]) {
                let r = y - t.eta[j];
                sums[j] += r * r;
                counts[j] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(cfg.heads.len());
    for j in 0..cfg.heads.len() {
        if !continuous[j] {
            out.push(None);
            continue;
        }
        if counts[j] < 2 {
            return Err(Error::TooFewObservations(format!(
                "outcome `{}` has {} observed training cells",
                cfg.heads[j].name, counts[j]
            )));
        }
        out.push(Some(sums[j] / counts[j] as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_masks, Activation};
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    fn specs() -> Vec<OutcomeSpec> {
        vec![
            OutcomeSpec::new("b", OutcomeKind::Binary),
            OutcomeSpec::new("c", OutcomeKind::Count),
            OutcomeSpec::new("y", OutcomeKind::Continuous),
        ]
    }

    #[test]
    fn cell_values() {
        assert!((cell_nll(OutcomeKind::Binary, 1.0, 0.0, 1.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((cell_nll(OutcomeKind::Count, 0.0, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((cell_nll(OutcomeKind::Continuous, 0.7, 0.7, 1.0) - 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn nll_rejects_bad_counts() {
        let s = specs();
        assert!(nll(&[0.0; 3], &[None, Some(2.5), None], &s).is_err());
        assert!(nll(&[0.0; 3], &[None, Some(-1.0), None], &s).is_err());
        assert!(nll(&[0.0; 3], &[None, None, None], &s).unwrap() == 0.0);
    }

    #[test]
    fn nll_order_invariant() {
        let s = specs();
        let eta = [0.3, -0.2, 1.5];
        let y = [Some(1.0), Some(3.0), Some(0.4)];
        let a = nll(&eta, &y, &s).unwrap();
        let perm = [2, 0, 1];
        let ps: Vec<OutcomeSpec> = perm.iter().map(|&p| s[p].clone()).collect();
        let pe: Vec<f64> = perm.iter().map(|&p| eta[p]).collect();
        let py: Vec<Option<f64>> = perm.iter().map(|&p| y[p]).collect();
        let b = nll(&pe, &py, &ps).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn sigma2_examples() {
        let cfg = NetworkConfig {
            input_dim: 1,
            hidden_widths: vec![],
            activation: Activation::Identity,
            hidden_keep: vec![],
            head_keep: vec![1.0],
            heads: vec![OutcomeSpec::new("y", OutcomeKind::Continuous)],
            n_train: 2,
            covariate_dim: 0,
        };
        let p = Params::zeros(&cfg);
        let x = DenseMatrix::from_rows(&[[0.0], [0.0]]).unwrap();
        let zero = TrainingSet::new(x.clone(), vec![vec![Some(0.0)], vec![Some(0.0)]]).unwrap();
        assert_eq!(estimate_sigma2(&cfg, &p, &zero).unwrap(), [Some(0.0)]);
        let pm = TrainingSet::new(x, vec![vec![Some(1.0)], vec![Some(-1.0)]]).unwrap();
        assert_eq!(estimate_sigma2(&cfg, &p, &pm).unwrap(), [Some(1.0)]);
        let one = TrainingSet::new(DenseMatrix::from_rows(&[[0.0]]).unwrap(), vec![vec![Some(3.0)]]).unwrap();
        assert!(estimate_sigma2(&cfg, &p, &one).is_err());
    }

    fn small_cfg(depth: usize, act: Activation, keep: f64) -> NetworkConfig {
        NetworkConfig {
            input_dim: 2,
            hidden_widths: vec![3; depth],
            activation: act,
            hidden_keep: vec![keep; depth],
            head_keep: vec![keep; 3],
            heads: specs(),
            n_train: 4,
            covariate_dim: 0,
        }
    }

    #[test]
    fn zero_params_loss_is_scaled_nll() {
        let cfg = small_cfg(2, Activation::Relu, 0.9);
        let p = Params::zeros(&cfg);
        let set = TrainingSet::new(
            DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, -1.0]]).unwrap(),
            vec![vec![Some(1.0), Some(0.0), Some(0.0)], vec![Some(0.0), Some(2.0), None]],
        )
        .unwrap();
        let m = MaskSet::ones(&cfg);
        let l = loss(&cfg, &p, &m, &set, &[0, 1]).unwrap();
        let raw = core::f64::consts::LN_2 * 2.0 + 1.0 + HALF_LN_TWO_PI + (1.0 + libm::log(2.0));
        assert!((l - 2.0 * raw).abs() < 1e-12);
    }

    #[test]
    fn zero_input_relu_gradient() {
        let cfg = small_cfg(1, Activation::Relu, 1.0);
        let mut p = Params::zeros(&cfg);
        p.layer_b_mut(0).fill(0.5);
        p.as_mut_slice().iter_mut().rev().take(8).for_each(|v| *v += 0.3);
        for j in 0..3 {
            p.head_w_mut(j).fill(0.7);
        }
        let set = TrainingSet::new(DenseMatrix::zeros(1, 2), vec![vec![Some(1.0), Some(3.0), Some(2.0)]]).unwrap();
        let g = grad(&cfg, &p, &MaskSet::ones(&cfg), &set, &[0]).unwrap();
        let pen = 2.0 * cfg.lambda_hidden(0);
        assert!(g.layer_w(0).iter().all(|&v| v == 0.0));
        assert!(g.layer_b(0).iter().all(|&v| (v - pen * 0.5).abs() > 1e-6));
    }

    #[test]
    fn penalty_gradient_alone() {
        let cfg = small_cfg(2, Activation::Tanh, 0.8);
        let mut rng = RngStream::new(1, 1);
        let mut p = Params::zeros(&cfg);
        p.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        let set = TrainingSet::new(DenseMatrix::zeros(1, 2), vec![vec![None, None, None]]).unwrap();
        let g = grad(&cfg, &p, &MaskSet::ones(&cfg), &set, &[0]).unwrap();
        let lam = cfg.lambda_hidden(0);
        for (gv, pv) in g.as_slice().iter().zip(p.as_slice()) {
            assert!((gv - 2.0 * lam * pv).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_objective_when_keep_is_one() {
        let cfg = small_cfg(2, Activation::Relu, 1.0);
        let mut rng = RngStream::new(2, 2);
        let mut p = Params::zeros(&cfg);
        p.as_mut_slice().iter_mut().for_each(|v| *v = 0.5 * rng.normal());
        let set = TrainingSet::new(
            DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, -0.4], [1.0, 1.0], [-1.0, 0.5]]).unwrap(),
            vec![
                vec![Some(1.0), Some(0.0), Some(0.3)],
                vec![Some(0.0), Some(1.0), Some(-0.3)],
                vec![None, Some(4.0), Some(1.1)],
                vec![Some(1.0), None, None],
            ],
        )
        .unwrap();
        let l = loss(&cfg, &p, &MaskSet::ones(&cfg), &set, &[0, 1, 2, 3]).unwrap();
        // plain NLL sum + (1/2N)·‖θ‖²
        let mut want = 0.0;
        for i in 0..4 {
            let t = forward_expected(&cfg, &p, set.inputs.row(i)).unwrap();
            want += nll(&t.eta, &set.responses[i], &cfg.heads).unwrap();
        }
        want += p.as_slice().iter().map(|v| v * v).sum::<f64>() / 8.0;
        assert!((l - want).abs() < 1e-12 * want.abs());
    }

    proptest! {
        #[test]
        fn binary_nll_convex(y in 0u8..2, e1 in -30.0f64..30.0, e2 in -30.0f64..30.0) {
            let y = y as f64;
            let mid = cell_nll(OutcomeKind::Binary, y, 0.5 * (e1 + e2), 1.0);
            let avg = 0.5 * (cell_nll(OutcomeKind::Binary, y, e1, 1.0) + cell_nll(OutcomeKind::Binary, y, e2, 1.0));
            prop_assert!(mid <= avg + 1e-12);
        }

        #[test]
        fn nll_row_order_invariant(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0);
            let s = specs();
            let rows: Vec<(Vec<f64>, Vec<Option<f64>>)> = (0..8).map(|_| {
                let eta = vec![rng.normal(), 0.5 * rng.normal(), rng.normal()];
                let y = vec![
                    rng.bernoulli(0.7).then(|| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }),
                    rng.bernoulli(0.7).then(|| rng.poisson(2.0) as f64),
                    rng.bernoulli(0.7).then(|| rng.normal()),
                ];
                (eta, y)
            }).collect();
            let fwd: f64 = rows.iter().map(|(e, y)| nll(e, y, &s).unwrap()).sum();
            let rev: f64 = rows.iter().rev().map(|(e, y)| nll(e, y, &s).unwrap()).sum();
            prop_assert!((fwd - rev).abs() <= 1e-12 * fwd.abs().max(1.0));
        }
    }

    #[test]
    fn per_row_masks_sum_like_shared() {
        let cfg = small_cfg(2, Activation::Relu, 0.5);
        let mut rng = RngStream::new(5, 5);
        let mut p = Params::zeros(&cfg);
        p.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        let set = TrainingSet::new(
            DenseMatrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]).unwrap(),
            vec![vec![Some(1.0), Some(0.0), Some(0.3)], vec![Some(0.0), Some(1.0), Some(-0.3)]],
        )
        .unwrap();
        let m = sample_masks(&cfg, &mut rng);
        let (l1, g1) = loss_and_grad(&cfg, &p, std::slice::from_ref(&m), &set, &[0, 1]).unwrap();
        let (l2, g2) = loss_and_grad(&cfg, &p, &[m.clone(), m], &set, &[0, 1]).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }
}
