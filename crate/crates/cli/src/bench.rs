//! Replicate benchmark: simulate, split, fit every enabled method, score.
//!
//! Replicate `r` draws everything from `master.split(r)`: the simulation
//! from sub-stream 0, the split from 1, network training seeds from 2 and
//! prediction seeds from 3. Methods never share a stream with each other, so
//! toggling one cannot move another's numbers, and results do not depend on
//! how replicates are spread over workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use mdgp_core::baselines::krige_all;
use mdgp_core::datagen::{simulate_case2, split, Case1Sampler, Split};
use mdgp_core::metrics::{aggregate, score_outcome, Metric, MetricRecord, MetricReport};
use mdgp_core::numerics::RngStream;
use mdgp_core::predict::{predict, predict_deterministic, Prediction};
use mdgp_core::train::{fit_model, FittedModel};

use crate::config::{Method, RunConfig, Source};
use crate::formats::dataset::read_dataset;
use crate::{Error, Result};

const STREAM_SIMULATE: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_PREDICT: u64 = 3;

/// Seeds derived for one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicateSeeds {
    pub stream: u64,
    pub train: u64,
    pub predict: u64,
}

pub fn replicate_seeds(cfg: &RunConfig, index: usize) -> ReplicateSeeds {
    let rep = RngStream::new(cfg.seed, 0).split(index as u64);
    ReplicateSeeds {
        stream: rep.stream(),
        train: rep.split(STREAM_TRAIN).next_u64(),
        predict: rep.split(STREAM_PREDICT).next_u64(),
    }
}

/// Simulator for the configured design, with any one-off set-up cached.
/// CSV input is a fixed train/test pair; its replicates differ only in the
/// training and prediction seeds.
pub enum Simulator {
    Case1(Box<Case1Sampler>),
    Case2,
    Fixed(Box<Split>),
}

impl Simulator {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        match cfg.data.source {
            Source::Case1 => Ok(Simulator::Case1(Box::new(Case1Sampler::new(&cfg.case1.to_core())?))),
            Source::Case2 => Ok(Simulator::Case2),
            Source::Csv => {
                let path = |p: &Option<std::path::PathBuf>, key: &str| {
                    p.as_ref()
                        .map(|p| cfg.resolve(p))
                        .ok_or_else(|| Error::Config(format!("data.source = csv needs csv.{key}")))
                };
                let train = read_dataset(&path(&cfg.csv.train, "train")?)?.dataset;
                let test = read_dataset(&path(&cfg.csv.test, "test")?)?.dataset;
                if train.outcomes != test.outcomes {
                    return Err(Error::Header("train and test files declare different outcomes".into()));
                }
                let (n, m) = (train.len(), test.len());
                Ok(Simulator::Fixed(Box::new(Split {
                    train,
                    test,
                    train_idx: (0..n).collect(),
                    test_idx: (n..n + m).collect(),
                })))
            }
        }
    }

    /// Train/test pair for replicate `index`.
    pub fn replicate(&self, cfg: &RunConfig, index: usize) -> Result<Split> {
        let rep = RngStream::new(cfg.seed, 0).split(index as u64);
        let sim = match self {
            Simulator::Case1(s) => s.sample(&rep.split(STREAM_SIMULATE))?,
            Simulator::Case2 => simulate_case2(&cfg.case2.to_core(), &rep.split(STREAM_SIMULATE))?,
            Simulator::Fixed(pair) => return Ok((**pair).clone()),
        };
        Ok(split(&sim.dataset, cfg.train_size(), &rep.split(STREAM_SPLIT))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub records: Vec<MetricRecord>,
    pub timings: Vec<(Method, f64)>,
    /// Free-form counters such as clamp events, keyed by (method, name).
    pub diagnostics: Vec<(Method, String, f64)>,
}

/// Fits and scores every enabled method on one train/test pair.
pub fn evaluate_split(cfg: &RunConfig, data: &Split, seeds: ReplicateSeeds, index: usize) -> Result<ReplicateResult> {
    let mut out = ReplicateResult { index, records: Vec::new(), timings: Vec::new(), diagnostics: Vec::new() };
    let targets = &data.test.locations;
    let covariates = data.test.features.as_ref();
    let wants = |m| cfg.methods.contains(&m);

    // the DNN baseline shares the DeepGP training run, so the network is fitted
    // once and its wall time charged to both
    let mut fitted: Option<(FittedModel, f64)> = None;
    if wants(Method::Deepgp) || wants(Method::Dnn) {
        let start = Instant::now();
        let basis = cfg.network.basis(&data.train.locations, &cfg.base_dir)?;
        let arch = cfg.network.architecture()?;
        let (model, report) = fit_model(&data.train, basis, &arch, &cfg.train.to_core(seeds.train))?;
        let secs = start.elapsed().as_secs_f64();
        for m in [Method::Deepgp, Method::Dnn].into_iter().filter(|&m| wants(m)) {
            out.diagnostics.push((m, "final_loss".into(), report.final_loss));
            out.diagnostics.push((m, "lr_halved".into(), f64::from(u8::from(report.lr_halved))));
        }
        fitted = Some((model, secs));
    }
    for method in cfg.methods.iter().copied() {
        let start = Instant::now();
        let (pred, base_secs): (Prediction, f64) = match method {
            Method::Deepgp => {
                let (model, secs) = fitted.as_ref().expect("network fitted above");
                (predict(model, targets, covariates, &cfg.predict.to_core(seeds.predict))?, *secs)
            }
            Method::Dnn => {
                let (model, secs) = fitted.as_ref().expect("network fitted above");
                (predict_deterministic(model, targets, covariates)?, *secs)
            }
            Method::Kriging => {
                let (pred, per) = krige_all(&data.train, targets, &cfg.kriging.to_core(cfg.predict.level))?;
                for (o, spec) in per.iter().zip(&data.train.outcomes) {
                    let vg = o.variogram;
                    for (key, v) in [("nugget", vg.nugget), ("partial_sill", vg.partial_sill), ("range", vg.range)] {
                        out.diagnostics.push((method, format!("{}_{key}", spec.name), v));
                    }
                    out.diagnostics.push((
                        method,
                        format!("{}_variance_clamped", spec.name),
                        o.variance_clamped as f64,
                    ));
                    out.diagnostics.push((
                        method,
                        format!("{}_probability_clamped", spec.name),
                        o.probability_clamped as f64,
                    ));
                }
                (pred, 0.0)
            }
        };
        out.timings.push((method, base_secs + start.elapsed().as_secs_f64()));
        for (j, spec) in data.test.outcomes.iter().enumerate() {
            let truth: Vec<Option<f64>> = data.test.responses.iter().map(|r| r[j]).collect();
            let cells: Vec<_> = pred.cells.iter().map(|r| r[j]).collect();
            out.records.extend(score_outcome(method.as_str(), &spec.name, spec.kind, &truth, &cells)?);
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct BenchResult {
    /// Per replicate, in index order; failures keep their message.
    pub replicates: Vec<std::result::Result<ReplicateResult, String>>,
    pub report: Option<MetricReport>,
    pub timing: Option<MetricReport>,
}

impl BenchResult {
    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_err()).count()
    }

    /// Successful replicates' records tagged with their index.
    pub fn raw_records(&self) -> Vec<(usize, MetricRecord)> {
        self.replicates
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .flat_map(|r| r.records.iter().map(move |m| (r.index, m.clone())))
            .collect()
    }
}

/// Runs all replicates on `cfg.workers` threads.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let sim = Simulator::new(cfg)?;
    let n = cfg.replicates;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<std::result::Result<ReplicateResult, String>>>> = Mutex::new(vec![None; n]);
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = sim
                    .replicate(cfg, i)
                    .and_then(|data| evaluate_split(cfg, &data, replicate_seeds(cfg, i), i))
                    .map_err(|e| e.to_string());
                slots.lock().expect("no worker panicked while holding the lock")[i] = Some(result);
            });
        }
    });
    let replicates: Vec<_> =
        slots.into_inner().expect("workers finished").into_iter().map(|s| s.expect("every replicate ran")).collect();
    let ok: Vec<&ReplicateResult> = replicates.iter().filter_map(|r| r.as_ref().ok()).collect();
    let records: Vec<MetricRecord> = ok.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let timings: Vec<MetricRecord> = ok
        .iter()
        .flat_map(|r| r.timings.iter())
        .map(|&(m, secs)| MetricRecord {
            method: m.as_str().into(),
            outcome: "all".into(),
            metric: Metric::WallSeconds,
            value: secs,
        })
        .collect();
    let report = if records.is_empty() { None } else { Some(aggregate(&records)?) };
    let timing = if timings.is_empty() { None } else { Some(aggregate(&timings)?) };
    Ok(BenchResult { replicates, report, timing })
}
