//! Parameter initialization and the dropout-training loop.

use alloc::format;
use alloc::vec::Vec;

use crate::datagen::{Dataset, OutcomeSpec};
use crate::model::{
    estimate_sigma2, loss_and_grad, sample_masks, Activation, InputEncoder, MaskSet, NetworkConfig, Params,
    SpatialBasis, TrainingSet,
};
use crate::numerics::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    /// Plain `θ ← θ − ρ ∇L`.
    Sgd,
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Global-norm gradient clipping threshold.
    pub gradient_clip: Option<f64>,
    /// Draw a fresh mask per row instead of one per minibatch.
    pub per_row_masks: bool,
    /// Stop after this many epochs without a lower epoch loss.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            gradient_clip: Some(5.0),
            per_row_masks: false,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if let Some(c) = self.gradient_clip {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig("gradient_clip must be positive".into()));
            }
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("patience must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch loss (full-data scale) per epoch.
    pub epoch_loss: Vec<f64>,
    pub final_loss: f64,
    /// Filled in by callers that own a clock; the core never reads one.
    pub wall_seconds: f64,
    pub steps: usize,
    pub lr_halved: bool,
}

/// Zero biases; weights `N(0, 2/fan_in)` for relu layers and `N(0, 1/fan_in)`
/// for tanh, identity and the heads.
pub fn init_params(cfg: &NetworkConfig, rng: &mut RngStream) -> Params {
    let mut p = Params::zeros(cfg);
    for l in 0..cfg.depth() {
        let (_, fan_in) = p.layer_shape(l);
        let gain = if cfg.activation == Activation::Relu { 2.0 } else { 1.0 };
        let sd = libm::sqrt(gain / fan_in as f64);
        p.layer_w_mut(l).iter_mut().for_each(|w| *w = sd * rng.normal());
    }
    for j in 0..cfg.heads.len() {
        let w = p.head_w_mut(j);
        let sd = libm::sqrt(1.0 / w.len().max(1) as f64);
        w.iter_mut().for_each(|v| *v = sd * rng.normal());
    }
    p
}

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_MASKS: u64 = 2;

/// Trains from the seeded initialization.
pub fn fit(set: &TrainingSet, cfg: &NetworkConfig, tcfg: &TrainConfig) -> Result<(Params, TrainReport)> {
    let init = init_params(cfg, &mut RngStream::new(tcfg.seed, 0).split(STREAM_INIT));
    fit_from(init, set, cfg, tcfg)
}

struct OptState {
    m: Params,
    v: Params,
    t: i32,
}

/// Minibatch dropout training starting at `params`.
///
/// Each epoch reshuffles the rows; each step draws fresh masks, takes the
/// exact gradient of the penalized loss and applies one optimizer update.
/// A non-finite loss rolls back the previous update and halves the learning
/// rate once; a second occurrence is reported as divergence.
pub fn fit_from(
    mut params: Params,
    set: &TrainingSet,
    cfg: &NetworkConfig,
    tcfg: &TrainConfig,
) -> Result<(Params, TrainReport)> {
    cfg.validate()?;
    tcfg.validate()?;
    set.validate_for(cfg)?;
    if !params.fits(cfg) {
        return Err(Error::DimensionMismatch("initial parameters do not match network config".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyInput("empty training set"));
    }
    let base = RngStream::new(tcfg.seed, 0);
    let mut shuffle_rng = base.split(STREAM_SHUFFLE);
    let mut mask_rng = base.split(STREAM_MASKS);
    let n = set.len();
    let mut lr = tcfg.learning_rate;
    let mut state = OptState { m: params.zeros_like(), v: params.zeros_like(), t: 0 };
    let mut backup: Option<(Params, Params, Params, i32)> = None;
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(tcfg.epochs),
        final_loss: f64::NAN,
        wall_seconds: 0.0,
        steps: 0,
        lr_halved: false,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut masks: Vec<MaskSet> = Vec::new();

    for epoch in 0..tcfg.epochs {
        let order = shuffle_rng.permutation(n);
        let mut epoch_total = 0.0;
        let mut batches = 0usize;
        for (step, batch) in order.chunks(tcfg.batch_size).enumerate() {
            masks.clear();
            let draws = if tcfg.per_row_masks { batch.len() } else { 1 };
            for _ in 0..draws {
                masks.push(sample_masks(cfg, &mut mask_rng));
            }
            let evaluated = match loss_and_grad(cfg, &params, &masks, set, batch) {
                Ok((l, g)) if l.is_finite() && g.is_finite() => Some((l, g)),
                Ok(_) | Err(Error::NonFinite(_)) => None,
                Err(e) => return Err(e),
            };
            let Some((l, mut g)) = evaluated else {
                if report.lr_halved {
                    return Err(Error::Divergence { epoch, step });
                }
                if let Some((p, m, v, t)) = backup.take() {
                    params = p;
                    state = OptState { m, v, t };
                }
                lr *= 0.5;
                report.lr_halved = true;
                continue;
            };
            if let Some(clip) = tcfg.gradient_clip {
                let norm = g.norm();
                if norm > clip {
                    g.scale(clip / norm);
                }
            }
            backup = Some((params.clone(), state.m.clone(), state.v.clone(), state.t));
            apply_update(&mut params, &g, &mut state, tcfg.optimizer, lr);
            epoch_total += l;
            batches += 1;
            report.steps += 1;
        }
        let epoch_loss = if batches > 0 { epoch_total / batches as f64 } else { f64::NAN };
        report.epoch_loss.push(epoch_loss);
        if let Some(patience) = tcfg.patience {
            if epoch_loss < best {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("parameters after training"));
    }
    report.final_loss = report.epoch_loss.last().copied().unwrap_or(f64::NAN);
    Ok((params, report))
}

fn apply_update(params: &mut Params, g: &Params, state: &mut OptState, opt: Optimizer, lr: f64) {
    match opt {
        Optimizer::Sgd => params.axpy(-lr, g),
        Optimizer::Adam { beta1, beta2, eps } => {
            state.t += 1;
            let c1 = 1.0 - libm::pow(beta1, state.t as f64);
            let c2 = 1.0 - libm::pow(beta2, state.t as f64);
            let p = params.as_mut_slice();
            let m = state.m.as_mut_slice();
            let v = state.v.as_mut_slice();
            for (((pi, mi), vi), gi) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.as_slice()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *pi -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
        }
    }
}

/// Architecture template; the input sizes, heads and `n_train` come from data.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    /// One per hidden layer, or a single value broadcast to all of them.
    pub hidden_keep: Vec<f64>,
    /// One per head, or a single value broadcast to all of them.
    pub head_keep: Vec<f64>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden_widths: alloc::vec![100, 100],
            activation: Activation::Relu,
            hidden_keep: alloc::vec![0.9],
            head_keep: alloc::vec![0.9],
        }
    }
}

fn broadcast(values: &[f64], n: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        len if len == n => Ok(values.to_vec()),
        1 => Ok(alloc::vec![values[0]; n]),
        len => Err(Error::InvalidConfig(format!("{len} {what} keep probabilities for {n} slots"))),
    }
}

impl Architecture {
    pub fn build(
        &self,
        input_dim: usize,
        covariate_dim: usize,
        heads: Vec<OutcomeSpec>,
        n_train: usize,
    ) -> Result<NetworkConfig> {
        let cfg = NetworkConfig {
            input_dim,
            hidden_keep: broadcast(&self.hidden_keep, self.hidden_widths.len(), "hidden")?,
            head_keep: broadcast(&self.head_keep, heads.len(), "head")?,
            hidden_widths: self.hidden_widths.clone(),
            activation: self.activation,
            heads,
            n_train,
            covariate_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything needed to predict at new locations.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub net: NetworkConfig,
    pub encoder: InputEncoder,
    pub params: Params,
    /// Residual variance per head (`Some` for continuous heads).
    pub sigma2: Vec<Option<f64>>,
}

/// Encodes `train`, fits the network and estimates the Gaussian variances.
pub fn fit_model(
    train: &Dataset,
    basis: SpatialBasis,
    arch: &Architecture,
    tcfg: &TrainConfig,
) -> Result<(FittedModel, TrainReport)> {
    let encoder = InputEncoder::fit(basis, train)?;
    let set = encoder.training_set(train)?;
    let net = arch.build(encoder.input_dim(), encoder.covariate_dim(), train.outcomes.clone(), train.len())?;
    let (params, report) = fit(&set, &net, tcfg)?;
    let sigma2 = estimate_sigma2(&net, &params, &set)?;
    Ok((FittedModel { net, encoder, params, sigma2 }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{simulate_case2, Case2Config, OutcomeKind};
    use crate::model::{forward_expected, grad};
    use crate::numerics::DenseMatrix;
    use alloc::vec;

    fn linear_cfg(n: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim: 1,
            hidden_widths: vec![],
            activation: Activation::Identity,
            hidden_keep: vec![],
            head_keep: vec![1.0],
            heads: vec![OutcomeSpec::new("y", OutcomeKind::Continuous)],
            n_train: n,
            covariate_dim: 0,
        }
    }

    #[test]
    fn init_sd_and_determinism() {
        let mut cfg = linear_cfg(1);
        cfg.hidden_widths = vec![1];
        cfg.hidden_keep = vec![1.0];
        cfg.activation = Activation::Relu;
        let a = init_params(&cfg, &mut RngStream::new(1, 0));
        let b = init_params(&cfg, &mut RngStream::new(1, 0));
        assert_eq!(a, b);
        assert_eq!(a.layer_b(0), [0.0]);

        let mut wide = linear_cfg(1);
        wide.input_dim = 1000;
        wide.hidden_widths = vec![1000];
        wide.hidden_keep = vec![1.0];
        wide.activation = Activation::Relu;
        let p = init_params(&wide, &mut RngStream::new(2, 0));
        let w = p.layer_w(0);
        let sd = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64);
        let target = libm::sqrt(2.0 / 1000.0);
        assert!((sd / target - 1.0).abs() < 0.02);
        wide.activation = Activation::Tanh;
        let p = init_params(&wide, &mut RngStream::new(2, 0));
        let w = p.layer_w(0);
        let sd = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64);
        assert!((sd / libm::sqrt(1.0 / 1000.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let cfg = linear_cfg(3);
        let set = TrainingSet::new(DenseMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap(), vec![vec![Some(1.0)]; 3])
            .unwrap();
        let tcfg = TrainConfig { epochs: 0, seed: 9, ..Default::default() };
        let (p, r) = fit(&set, &cfg, &tcfg).unwrap();
        assert_eq!(p, init_params(&cfg, &mut RngStream::new(9, 0).split(STREAM_INIT)));
        assert!(r.epoch_loss.is_empty());
    }

    #[test]
    fn linear_reduction_matches_least_squares() {
        // noiseless y = 2x − 1: OLS recovers slope 2, intercept −1 exactly
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 / 25.0).collect();
        let set = TrainingSet::new(
            DenseMatrix::from_fn(50, 1, |i, _| xs[i]),
            xs.iter().map(|x| vec![Some(2.0 * x - 1.0)]).collect(),
        )
        .unwrap();
        let (sxx, sxy, mx, my) = {
            let mx = xs.iter().sum::<f64>() / 50.0;
            let my = xs.iter().map(|x| 2.0 * x - 1.0).sum::<f64>() / 50.0;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 = xs.iter().map(|x| (x - mx) * (2.0 * x - 1.0 - my)).sum();
            (sxx, sxy, mx, my)
        };
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let cfg = linear_cfg(50);
        let tcfg = TrainConfig {
            epochs: 3000,
            batch_size: 50,
            learning_rate: 1e-2,
            gradient_clip: None,
            ..Default::default()
        };
        let (p, _) = fit(&set, &cfg, &tcfg).unwrap();
        assert!((p.head_w(0)[0] - slope).abs() < 1e-2, "slope {}", p.head_w(0)[0]);
        assert!((p.head_b(0) - intercept).abs() < 1e-2, "intercept {}", p.head_b(0));
    }

    #[test]
    fn deterministic_given_seed() {
        let sim = simulate_case2(&Case2Config { n: 120, ..Default::default() }, &RngStream::new(3, 0)).unwrap();
        let arch = Architecture { hidden_widths: vec![8, 8], ..Default::default() };
        let tcfg = TrainConfig { epochs: 5, batch_size: 32, seed: 4, ..Default::default() };
        let (a, ra) = fit_model(&sim.dataset, SpatialBasis::Coords, &arch, &tcfg).unwrap();
        let (b, rb) = fit_model(&sim.dataset, SpatialBasis::Coords, &arch, &tcfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.epoch_loss, rb.epoch_loss);
        assert_eq!(ra.epoch_loss.len(), 5);
        assert!(a.sigma2[2].unwrap() > 0.0 && a.sigma2[0].is_none());
    }

    #[test]
    fn full_batch_equals_half_batches_without_dropout() {
        let sim = simulate_case2(&Case2Config { n: 40, ..Default::default() }, &RngStream::new(8, 0)).unwrap();
        let enc = InputEncoder::fit(SpatialBasis::Coords, &sim.dataset).unwrap();
        let set = enc.training_set(&sim.dataset).unwrap();
        let arch =
            Architecture { hidden_widths: vec![6], hidden_keep: vec![1.0], head_keep: vec![1.0], ..Default::default() };
        let cfg = arch.build(2, 0, sim.dataset.outcomes.clone(), 40).unwrap();
        let p = init_params(&cfg, &mut RngStream::new(1, 1));
        let m = MaskSet::ones(&cfg);
        let all: Vec<usize> = (0..40).collect();
        let full = grad(&cfg, &p, &m, &set, &all).unwrap();
        let mut halves = grad(&cfg, &p, &m, &set, &all[..20]).unwrap();
        halves.axpy(1.0, &grad(&cfg, &p, &m, &set, &all[20..]).unwrap());
        halves.scale(0.5);
        for (a, b) in full.as_slice().iter().zip(halves.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn keep_one_is_deterministic_weight_decay_training() {
        // with keep = 1 and per-row masks the sampled masks are all ones, so
        // both mask modes must give bit-identical trajectories
        let sim = simulate_case2(&Case2Config { n: 60, ..Default::default() }, &RngStream::new(6, 0)).unwrap();
        let arch =
            Architecture { hidden_widths: vec![5], hidden_keep: vec![1.0], head_keep: vec![1.0], ..Default::default() };
        let shared = TrainConfig { epochs: 3, batch_size: 16, seed: 2, ..Default::default() };
        let per_row = TrainConfig { per_row_masks: true, ..shared.clone() };
        let (a, _) = fit_model(&sim.dataset, SpatialBasis::Coords, &arch, &shared).unwrap();
        let (b, _) = fit_model(&sim.dataset, SpatialBasis::Coords, &arch, &per_row).unwrap();
        assert_eq!(a.params, b.params);
        let t = forward_expected(&a.net, &a.params, &[0.0, 0.0]).unwrap();
        assert!(t.eta.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn divergence_is_reported() {
        // huge SGD steps on a Poisson head overflow exp(η)
        let mut cfg = linear_cfg(4);
        cfg.heads = vec![OutcomeSpec::new("c", OutcomeKind::Count)];
        let set = TrainingSet::new(
            DenseMatrix::from_rows(&[[10.0], [20.0], [30.0], [40.0]]).unwrap(),
            vec![vec![Some(100.0)]; 4],
        )
        .unwrap();
        let tcfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            learning_rate: 1e3,
            optimizer: Optimizer::Sgd,
            gradient_clip: None,
            ..Default::default()
        };
        match fit(&set, &cfg, &tcfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn broadcast_rules() {
        let arch = Architecture {
            hidden_widths: vec![3, 3],
            hidden_keep: vec![0.8, 0.7],
            head_keep: vec![0.9],
            ..Default::default()
        };
        let heads = vec![OutcomeSpec::new("a", OutcomeKind::Binary), OutcomeSpec::new("b", OutcomeKind::Count)];
        let cfg = arch.build(2, 0, heads.clone(), 10).unwrap();
        assert_eq!(cfg.head_keep, [0.9, 0.9]);
        let bad = Architecture { hidden_keep: vec![0.8, 0.7, 0.6], ..arch };
        assert!(bad.build(2, 0, heads, 10).is_err());
    }
}
