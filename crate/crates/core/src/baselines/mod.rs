//! Comparators: per-outcome kriging and the deterministic multi-task DNN.

mod kriging;
mod variogram;

pub use kriging::{krige, Kriging, KrigingMode, KrigingPrediction};
pub use variogram::{empirical_semivariogram, fit_variogram, max_pair_distance, VariogramBin, VariogramModel};

use alloc::format;
use alloc::vec::Vec;

use crate::datagen::{Dataset, Location, OutcomeKind};
use crate::model::SpatialBasis;
use crate::numerics::special::normal_quantile;
use crate::numerics::DenseMatrix;
use crate::predict::{predict_deterministic, CellPrediction, Interval, Prediction};
use crate::train::{fit_model, Architecture, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CountTransform {
    /// Krige `ln(1 + y)` and back-transform.
    #[default]
    Log1p,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingOptions {
    pub n_bins: usize,
    /// Defaults to half the largest pairwise distance.
    pub max_dist: Option<f64>,
    pub mode: KrigingMode,
    pub count_transform: CountTransform,
    pub level: f64,
}

impl Default for KrigingOptions {
    fn default() -> Self {
        Self {
            n_bins: 15,
            max_dist: None,
            mode: KrigingMode::Ordinary,
            count_transform: CountTransform::Log1p,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigedOutcome {
    pub cells: Vec<CellPrediction>,
    pub variogram: VariogramModel,
    /// Negative kriging variances set to zero.
    pub variance_clamped: usize,
    /// Indicator-kriging means pulled back into `[0, 1]`.
    pub probability_clamped: usize,
}

/// Fits a variogram to the observed values of outcome `j` and kriges them.
///
/// Binary outcomes are kriged as indicators and carry no interval. Counts
/// are kriged on the transformed scale with the interval endpoints mapped
/// back individually and snapped outward to integers.
pub fn krige_outcome(train: &Dataset, targets: &[Location], j: usize, opts: &KrigingOptions) -> Result<KrigedOutcome> {
    let spec = train.outcomes.get(j).ok_or_else(|| Error::DimensionMismatch(format!("outcome {j} out of range")))?;
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidConfig(format!("level {} outside (0, 1)", opts.level)));
    }
    let obs = train.observed(j);
    let locs: Vec<Location> = obs.iter().map(|&(i, _)| train.locations[i].clone()).collect();
    let log_scale = spec.kind == OutcomeKind::Count && opts.count_transform == CountTransform::Log1p;
    let values: Vec<f64> = obs.iter().map(|&(_, y)| if log_scale { libm::log1p(y) } else { y }).collect();
    let max_dist = match opts.max_dist {
        Some(d) => d,
        None => 0.5 * max_pair_distance(&locs),
    };
    let bins = empirical_semivariogram(&locs, &values, opts.n_bins, max_dist)?;
    let vg = fit_variogram(&bins)?;
    let pred = Kriging::new(&locs, &values, vg, opts.mode)?.predict(targets)?;
    let z = normal_quantile(0.5 + opts.level / 2.0);
    let mut probability_clamped = 0;
    let cells = pred
        .mean
        .iter()
        .zip(&pred.variance)
        .map(|(&m, &v)| {
            let sd = libm::sqrt(v);
            let (mean, interval) = match spec.kind {
                OutcomeKind::Binary => {
                    if !(0.0..=1.0).contains(&m) {
                        probability_clamped += 1;
                    }
                    (m.clamp(0.0, 1.0), None)
                }
                OutcomeKind::Count if log_scale => (
                    libm::expm1(m).max(0.0),
                    Some(Interval {
                        lo: libm::floor(libm::expm1(m - z * sd).max(0.0)),
                        hi: libm::ceil(libm::expm1(m + z * sd).max(0.0)),
                    }),
                ),
                OutcomeKind::Count => (
                    m.max(0.0),
                    Some(Interval { lo: libm::floor((m - z * sd).max(0.0)), hi: libm::ceil((m + z * sd).max(0.0)) }),
                ),
                OutcomeKind::Continuous => (m, Some(Interval { lo: m - z * sd, hi: m + z * sd })),
            };
            CellPrediction { mean, interval, sd: Some(sd) }
        })
        .collect();
    Ok(KrigedOutcome { cells, variogram: vg, variance_clamped: pred.clamped, probability_clamped })
}

/// Kriges every outcome independently into one prediction table.
pub fn krige_all(
    train: &Dataset,
    targets: &[Location],
    opts: &KrigingOptions,
) -> Result<(Prediction, Vec<KrigedOutcome>)> {
    let per: Vec<KrigedOutcome> =
        (0..train.outcomes.len()).map(|j| krige_outcome(train, targets, j, opts)).collect::<Result<_>>()?;
    let cells = (0..targets.len()).map(|i| per.iter().map(|o| o.cells[i]).collect()).collect();
    Ok((Prediction { outcomes: train.outcomes.clone(), cells }, per))
}

/// Trains the shared network, then predicts with the deterministic
/// keep-rescaled pass; no intervals are produced.
pub fn dnn_fit_predict(
    train: &Dataset,
    targets: &[Location],
    covariates: Option<&DenseMatrix>,
    basis: SpatialBasis,
    arch: &Architecture,
    tcfg: &TrainConfig,
) -> Result<Prediction> {
    let (model, _) = fit_model(train, basis, arch, tcfg)?;
    predict_deterministic(&model, targets, covariates)
}
