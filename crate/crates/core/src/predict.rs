//! Monte Carlo dropout prediction: mixture means, simulated-response
//! intervals and the composite spatial score.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::{Location, OutcomeKind, OutcomeSpec};
use crate::model::{forward, forward_expected, sample_masks, NetworkConfig, Params};
use crate::numerics::{quantile_sorted, DenseMatrix, RngStream};
use crate::train::FittedModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub m_draws: usize,
    pub level: f64,
    /// Conditional response draws per parameter draw.
    pub y_per_draw: usize,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { m_draws: 200, level: 0.95, y_per_draw: 20, seed: 0 }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_draws == 0 || self.y_per_draw == 0 {
            return Err(Error::InvalidConfig("m_draws and y_per_draw must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Linear predictors from `m` masked passes, indexed `[draw][location][outcome]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub eta: Vec<Vec<Vec<f64>>>,
    /// Stream id of the mask draw behind each pass.
    pub mask_streams: Vec<u64>,
}

impl PredictiveSamples {
    pub fn m_draws(&self) -> usize {
        self.eta.len()
    }

    pub fn locations(&self) -> usize {
        self.eta.first().map_or(0, Vec::len)
    }

    pub fn outcomes(&self) -> usize {
        self.eta.first().and_then(|d| d.first()).map_or(0, Vec::len)
    }

    fn cell(&self, i: usize, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.eta.iter().map(move |d| d[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// One (location, outcome) cell. Methods without intervals leave them empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPrediction {
    pub mean: f64,
    pub interval: Option<Interval>,
    /// Spread of the mean parameter across draws.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub outcomes: Vec<OutcomeSpec>,
    /// Indexed `[location][outcome]`.
    pub cells: Vec<Vec<CellPrediction>>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Column `j` of predicted means.
    pub fn means(&self, j: usize) -> Vec<f64> {
        self.cells.iter().map(|r| r[j].mean).collect()
    }
}

const STREAM_MASKS: u64 = 0;
const STREAM_RESPONSES: u64 = 1;

/// Draw `m` mask sets, each from `mask_rng.split(m)`, and run every input row
/// through each masked network. One mask set is shared by all locations.
pub fn mc_forward(
    params: &Params,
    net: &NetworkConfig,
    inputs: &DenseMatrix,
    m_draws: usize,
    mask_rng: &RngStream,
) -> Result<PredictiveSamples> {
    if inputs.cols() != net.row_dim() {
        return Err(Error::DimensionMismatch(format!(
            "inputs have {} columns, network expects {}",
            inputs.cols(),
            net.row_dim()
        )));
    }
    let mut eta = Vec::with_capacity(m_draws);
    let mut mask_streams = Vec::with_capacity(m_draws);
    for m in 0..m_draws {
        let mut rng = mask_rng.split(m as u64);
        mask_streams.push(rng.stream());
        let masks = sample_masks(net, &mut rng);
        let draw = (0..inputs.rows())
            .map(|i| forward(net, params, &masks, inputs.row(i)).map(|t| t.eta))
            .collect::<Result<Vec<_>>>()?;
        eta.push(draw);
    }
    Ok(PredictiveSamples { eta, mask_streams })
}

/// Per-cell mixture mean of the inverse-link draws, `[location][outcome]`.
pub fn predictive_mean(samples: &PredictiveSamples, specs: &[OutcomeSpec]) -> Vec<Vec<f64>> {
    let m = samples.m_draws() as f64;
    (0..samples.locations())
        .map(|i| {
            specs
                .iter()
                .enumerate()
                .map(|(j, s)| samples.cell(i, j).map(|e| s.kind.mean_from_eta(e)).sum::<f64>() / m)
                .collect()
        })
        .collect()
}

/// Sample sd (divisor `m − 1`) of the inverse-link draws; zero when `m = 1`.
pub fn predictive_sd(samples: &PredictiveSamples, specs: &[OutcomeSpec]) -> Vec<Vec<f64>> {
    let m = samples.m_draws();
    (0..samples.locations())
        .map(|i| {
            specs
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    if m < 2 {
                        return 0.0;
                    }
                    let v: Vec<f64> = samples.cell(i, j).map(|e| s.kind.mean_from_eta(e)).collect();
                    let mean = v.iter().sum::<f64>() / m as f64;
                    libm::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64)
                })
                .collect()
        })
        .collect()
}

/// Equal-tailed interval of simulated responses pooled over all draws.
///
/// Cell `(i, j)` draws its responses from `rng.split(i · outcomes + j)`, so
/// cells are independent of evaluation order. Count endpoints are snapped
/// outward to integers.
pub fn predictive_interval(
    samples: &PredictiveSamples,
    specs: &[OutcomeSpec],
    sigma2: &[Option<f64>],
    level: f64,
    y_per_draw: usize,
    rng: &RngStream,
) -> Result<Vec<Vec<Interval>>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level {level} outside (0, 1)")));
    }
    if sigma2.len() != specs.len() {
        return Err(Error::DimensionMismatch(format!("{} variances for {} outcomes", sigma2.len(), specs.len())));
    }
    for (s, v) in specs.iter().zip(sigma2) {
        if s.kind == OutcomeKind::Continuous && v.is_none() {
            return Err(Error::MissingSigma2(s.name.clone()));
        }
    }
    let alpha = 1.0 - level;
    let k = specs.len();
    let mut pooled = Vec::with_capacity(samples.m_draws() * y_per_draw);
    let mut out = Vec::with_capacity(samples.locations());
    for i in 0..samples.locations() {
        let mut row = Vec::with_capacity(k);
        for (j, spec) in specs.iter().enumerate() {
            let mut cell_rng = rng.split((i * k + j) as u64);
            pooled.clear();
            for eta in samples.cell(i, j) {
                for _ in 0..y_per_draw {
                    pooled.push(match spec.kind {
                        OutcomeKind::Binary => {
                            f64::from(u8::from(cell_rng.bernoulli(OutcomeKind::Binary.mean_from_eta(eta))))
                        }
                        OutcomeKind::Count => cell_rng.poisson(libm::exp(eta)) as f64,
                        OutcomeKind::Continuous => eta + libm::sqrt(sigma2[j].unwrap_or(0.0)) * cell_rng.normal(),
                    });
                }
            }
            pooled.sort_unstable_by(f64::total_cmp);
            let mut lo = quantile_sorted(&pooled, alpha / 2.0);
            let mut hi = quantile_sorted(&pooled, 1.0 - alpha / 2.0);
            if spec.kind == OutcomeKind::Count {
                lo = libm::floor(lo);
                hi = libm::ceil(hi);
            }
            row.push(Interval { lo, hi });
        }
        out.push(row);
    }
    Ok(out)
}

/// Full MC-dropout prediction from a fitted model at new locations.
pub fn predict(
    model: &FittedModel,
    locations: &[Location],
    covariates: Option<&DenseMatrix>,
    pcfg: &PredictConfig,
) -> Result<Prediction> {
    pcfg.validate()?;
    let inputs = model.encoder.encode(locations, covariates)?;
    let base = RngStream::new(pcfg.seed, 0);
    let samples = mc_forward(&model.params, &model.net, &inputs, pcfg.m_draws, &base.split(STREAM_MASKS))?;
    let specs = &model.net.heads;
    let means = predictive_mean(&samples, specs);
    let sds = predictive_sd(&samples, specs);
    let intervals = predictive_interval(
        &samples,
        specs,
        &model.sigma2,
        pcfg.level,
        pcfg.y_per_draw,
        &base.split(STREAM_RESPONSES),
    )?;
    let cells = means
        .into_iter()
        .zip(sds)
        .zip(intervals)
        .map(|((m, s), iv)| {
            m.into_iter()
                .zip(s)
                .zip(iv)
                .map(|((mean, sd), interval)| CellPrediction { mean, interval: Some(interval), sd: Some(sd) })
                .collect()
        })
        .collect();
    Ok(Prediction { outcomes: specs.clone(), cells })
}

/// Point predictions from the mask-free, keep-rescaled network.
pub fn predict_deterministic(
    model: &FittedModel,
    locations: &[Location],
    covariates: Option<&DenseMatrix>,
) -> Result<Prediction> {
    let inputs = model.encoder.encode(locations, covariates)?;
    let specs = &model.net.heads;
    let cells = (0..inputs.rows())
        .map(|i| {
            let t = forward_expected(&model.net, &model.params, inputs.row(i))?;
            Ok(specs
                .iter()
                .zip(&t.eta)
                .map(|(s, &e)| CellPrediction { mean: s.kind.mean_from_eta(e), interval: None, sd: None })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prediction { outcomes: specs.clone(), cells })
}

/// Average of per-surface z-scores (population sd) at each location.
pub fn composite_score(surfaces: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = surfaces.first().ok_or(Error::EmptyInput("no surfaces for composite score"))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty surface"));
    }
    let mut score = vec![0.0; n];
    for (j, s) in surfaces.iter().enumerate() {
        if s.len() != n {
            return Err(Error::DimensionMismatch(format!("surface {j} has {} locations, expected {n}", s.len())));
        }
        let mean = s.iter().sum::<f64>() / n as f64;
        let sd = libm::sqrt(s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::ZeroVariance(j));
        }
        for (acc, v) in score.iter_mut().zip(s) {
            *acc += (v - mean) / sd;
        }
    }
    let k = surfaces.len() as f64;
    score.iter_mut().for_each(|v| *v /= k);
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, InputEncoder, SpatialBasis, Standardizer};
    use crate::train::init_params;

    fn specs() -> Vec<OutcomeSpec> {
        vec![
            OutcomeSpec::new("b", OutcomeKind::Binary),
            OutcomeSpec::new("c", OutcomeKind::Count),
            OutcomeSpec::new("y", OutcomeKind::Continuous),
        ]
    }

    fn net(keep: f64) -> NetworkConfig {
        NetworkConfig {
            input_dim: 2,
            hidden_widths: vec![16, 16],
            activation: Activation::Relu,
            hidden_keep: vec![keep; 2],
            head_keep: vec![keep; 3],
            heads: specs(),
            n_train: 100,
            covariate_dim: 0,
        }
    }

    fn grid_inputs(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 2, |i, j| if j == 0 { i as f64 / n as f64 } else { 1.0 - i as f64 / n as f64 })
    }

    fn constant(eta: f64, m: usize, locs: usize) -> PredictiveSamples {
        PredictiveSamples { eta: vec![vec![vec![eta; 3]; locs]; m], mask_streams: vec![0; m] }
    }

    #[test]
    fn keep_one_gives_identical_draws() {
        let cfg = net(1.0);
        let p = init_params(&cfg, &mut RngStream::new(1, 0));
        let s = mc_forward(&p, &cfg, &grid_inputs(5), 10, &RngStream::new(2, 0)).unwrap();
        assert!(s.eta.iter().all(|d| d == &s.eta[0]));
    }

    #[test]
    fn single_draw_matches_direct_forward() {
        let cfg = net(0.7);
        let p = init_params(&cfg, &mut RngStream::new(1, 0));
        let x = grid_inputs(4);
        let base = RngStream::new(3, 0);
        let s = mc_forward(&p, &cfg, &x, 1, &base).unwrap();
        let masks = sample_masks(&cfg, &mut base.split(0));
        for i in 0..4 {
            assert_eq!(s.eta[0][i], forward(&cfg, &p, &masks, x.row(i)).unwrap().eta);
        }
        assert_eq!(s.mask_streams, [base.split(0).stream()]);
    }

    #[test]
    fn draw_variance_grows_as_keep_drops() {
        let x = grid_inputs(20);
        let p = init_params(&net(1.0), &mut RngStream::new(5, 0));
        let mut last = -1.0;
        // one masked layer: the per-unit variance k(1 − k) grows on [0.5, 1];
        // stacked masks compound to an effective keep below 0.5 and stop growing
        for keep in [1.0, 0.9, 0.8, 0.7, 0.6, 0.5] {
            let mut cfg = net(1.0);
            cfg.head_keep = vec![keep; 3];
            let s = mc_forward(&p, &cfg, &x, 400, &RngStream::new(6, 0)).unwrap();
            let mut v = 0.0;
            for i in 0..20 {
                let e: Vec<f64> = s.cell(i, 2).collect();
                let mean = e.iter().sum::<f64>() / e.len() as f64;
                v += e.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / e.len() as f64;
            }
            v /= 20.0;
            assert!(v >= last, "keep {keep}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn mean_examples() {
        let m = predictive_mean(&constant(0.0, 5, 2), &specs());
        assert_eq!(m[0], [0.5, 1.0, 0.0]);
        let s = PredictiveSamples { eta: vec![vec![vec![1.0; 3]], vec![vec![3.0; 3]]], mask_streams: vec![0, 1] };
        assert_eq!(predictive_mean(&s, &specs())[0][2], 2.0);
        let big = predictive_mean(&constant(30.0, 2, 1), &specs());
        assert!(big[0][0] <= 1.0 && big[0][1] > 0.0);
        let small = predictive_mean(&constant(-30.0, 2, 1), &specs());
        assert!(small[0][0] > 0.0 && small[0][1] > 0.0);
    }

    #[test]
    fn interval_examples() {
        let rng = RngStream::new(7, 0);
        let deg =
            predictive_interval(&constant(0.4, 20, 1), &specs(), &[None, None, Some(0.0)], 0.95, 20, &rng).unwrap();
        assert_eq!(deg[0][2], Interval { lo: 0.4, hi: 0.4 });
        let zero = constant(0.0, 200, 3);
        let iv = predictive_interval(&zero, &specs(), &[None, None, Some(1.0)], 0.95, 20, &rng).unwrap();
        for row in &iv {
            assert_eq!(row[1], Interval { lo: 0.0, hi: 3.0 });
            assert_eq!(row[0], Interval { lo: 0.0, hi: 1.0 });
            assert!((row[2].width() / (2.0 * 1.959964) - 1.0).abs() < 0.1);
        }
        assert!(matches!(
            predictive_interval(&zero, &specs(), &[None, None, None], 0.95, 2, &rng),
            Err(Error::MissingSigma2(_))
        ));
    }

    #[test]
    fn wider_level_nests() {
        let cfg = net(0.8);
        let p = init_params(&cfg, &mut RngStream::new(1, 0));
        let s = mc_forward(&p, &cfg, &grid_inputs(10), 50, &RngStream::new(2, 0)).unwrap();
        let sig = [None, None, Some(0.3)];
        let rng = RngStream::new(4, 0);
        let a = predictive_interval(&s, &specs(), &sig, 0.95, 20, &rng).unwrap();
        let b = predictive_interval(&s, &specs(), &sig, 0.99, 20, &rng).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!(y.lo <= x.lo && x.hi <= y.hi);
                assert!(x.lo <= x.hi);
            }
        }
    }

    #[test]
    fn coverage_self_consistency() {
        // known net, keep 1, true noise variance: intervals must be calibrated
        let mut cfg = net(1.0);
        cfg.heads = vec![OutcomeSpec::new("y", OutcomeKind::Continuous)];
        cfg.head_keep = vec![1.0];
        let p = init_params(&cfg, &mut RngStream::new(11, 0));
        let n = 5000;
        let x = DenseMatrix::from_fn(n, 2, |i, j| ((i * 7919 + j * 104729) % 1000) as f64 / 500.0 - 1.0);
        let sigma2 = 0.5;
        let mut noise = RngStream::new(12, 0);
        let s = mc_forward(&p, &cfg, &x, 200, &RngStream::new(13, 0)).unwrap();
        let iv = predictive_interval(&s, &cfg.heads, &[Some(sigma2)], 0.95, 20, &RngStream::new(14, 0)).unwrap();
        let covered =
            (0..n).filter(|&i| iv[i][0].contains(s.eta[0][i][0] + libm::sqrt(sigma2) * noise.normal())).count();
        let rate = covered as f64 / n as f64;
        assert!((rate - 0.95).abs() <= 0.02, "coverage {rate}");
    }

    #[test]
    fn composite_examples() {
        let a = vec![1.0, 2.0, 3.0, 6.0];
        let z = composite_score(std::slice::from_ref(&a)).unwrap();
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        let zz = composite_score(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(z, zz);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!(composite_score(&[a, neg]).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(composite_score(&[vec![1.0, 1.0]]), Err(Error::ZeroVariance(0))));
    }

    #[test]
    fn predict_is_deterministic() {
        let cfg = net(0.9);
        let model = FittedModel {
            params: init_params(&cfg, &mut RngStream::new(1, 0)),
            encoder: InputEncoder {
                basis: SpatialBasis::Coords,
                spatial: Standardizer::identity(2),
                covariates: Standardizer::identity(0),
            },
            sigma2: vec![None, None, Some(0.2)],
            net: cfg,
        };
        let locs: Vec<Location> = (0..6).map(|i| Location(vec![i as f64 / 6.0, 0.5])).collect();
        let pcfg = PredictConfig { m_draws: 30, seed: 5, ..Default::default() };
        let a = predict(&model, &locs, None, &pcfg).unwrap();
        assert_eq!(a, predict(&model, &locs, None, &pcfg).unwrap());
        for row in &a.cells {
            assert!(row[0].mean > 0.0 && row[0].mean < 1.0);
            assert!(row.iter().all(|c| c.interval.unwrap().lo <= c.interval.unwrap().hi));
        }
        let d = predict_deterministic(&model, &locs, None).unwrap();
        assert!(d.cells.iter().flatten().all(|c| c.interval.is_none()));
    }
}
