//! Run configuration (TOML). Every table is optional and every key has a
//! default; unknown keys anywhere are rejected.
//!
//! ```toml
//! seed = 7
//! replicates = 20
//! methods = ["deepgp", "dnn", "kriging"]
//!
//! [data]
//! source = "case1"          # case1 | case2 | csv
//!
//! [network]
//! basis = "tps"             # coords | tps
//! knots = [40]
//! hidden_widths = [64, 64]
//! ```

use std::path::{Path, PathBuf};

use mdgp_core::baselines::{CountTransform, KrigingMode, KrigingOptions};
use mdgp_core::datagen::{knot_lattice, Case1Config, Case2Config, KnotSet, Layout, Location, TrainSize};
use mdgp_core::model::{Activation, SpatialBasis};
use mdgp_core::predict::PredictConfig;
use mdgp_core::train::{Architecture, Optimizer, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::knots::{parse_knots, parse_polygon};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// MC-dropout predictions from the shared network.
    Deepgp,
    /// Deterministic predictions from the same network.
    Dnn,
    Kriging,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Deepgp, Method::Dnn, Method::Kriging];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Deepgp => "deepgp",
            Method::Dnn => "dnn",
            Method::Kriging => "kriging",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| Method::parse(t).ok_or_else(|| Error::Config(format!("unknown method `{t}`"))))
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Case1,
    Case2,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case1Section {
    pub n: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub tau2: f64,
    pub c: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub train_count: usize,
}

impl Default for Case1Section {
    fn default() -> Self {
        let d = Case1Config::default();
        Self {
            n: d.n,
            mu: d.mu,
            sigma2: d.sigma2,
            rho: d.rho,
            tau2: d.tau2,
            c: d.c,
            kappa: d.kappa,
            alpha: d.alpha,
            beta: d.beta,
            train_count: d.train_count,
        }
    }
}

impl Case1Section {
    pub fn to_core(&self) -> Case1Config {
        Case1Config {
            n: self.n,
            mu: self.mu,
            sigma2: self.sigma2,
            rho: self.rho,
            tau2: self.tau2,
            c: self.c,
            kappa: self.kappa,
            alpha: self.alpha,
            beta: self.beta,
            train_count: self.train_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LayoutName {
    #[default]
    Uniform,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case2Section {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub train_frac: f64,
    pub layout: LayoutName,
}

impl Default for Case2Section {
    fn default() -> Self {
        let d = Case2Config::default();
        Self {
            n: d.n,
            alpha: d.alpha,
            beta: d.beta,
            sigma2: d.sigma2,
            train_frac: d.train_frac,
            layout: LayoutName::Uniform,
        }
    }
}

impl Case2Section {
    pub fn to_core(&self) -> Case2Config {
        Case2Config {
            n: self.n,
            alpha: self.alpha,
            beta: self.beta,
            sigma2: self.sigma2,
            train_frac: self.train_frac,
            layout: match self.layout {
                LayoutName::Uniform => Layout::Uniform,
                LayoutName::Grid => Layout::Grid,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    #[default]
    Coords,
    Tps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub basis: BasisName,
    /// Lattice points per axis for the TPS basis.
    pub knots: Vec<usize>,
    /// `[min, max]` per axis; defaults to the training bounding box.
    pub knot_bbox: Option<Vec<[f64; 2]>>,
    /// Polygon CSV restricting the lattice.
    pub knot_mask: Option<PathBuf>,
    /// Explicit knot CSV, used instead of a lattice.
    pub knot_file: Option<PathBuf>,
    pub hidden_widths: Vec<usize>,
    pub activation: String,
    pub hidden_keep: Vec<f64>,
    pub head_keep: Vec<f64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let a = Architecture::default();
        Self {
            basis: BasisName::Coords,
            knots: vec![25, 25],
            knot_bbox: None,
            knot_mask: None,
            knot_file: None,
            hidden_widths: a.hidden_widths,
            activation: a.activation.as_str().to_string(),
            hidden_keep: a.hidden_keep,
            head_keep: a.head_keep,
        }
    }
}

impl NetworkSection {
    pub fn architecture(&self) -> Result<Architecture> {
        Ok(Architecture {
            hidden_widths: self.hidden_widths.clone(),
            activation: Activation::parse(&self.activation)
                .ok_or_else(|| Error::Config(format!("unknown activation `{}`", self.activation)))?,
            hidden_keep: self.hidden_keep.clone(),
            head_keep: self.head_keep.clone(),
        })
    }

    /// Resolves the spatial embedding against the training locations.
    /// Relative paths are taken from `base`.
    pub fn basis(&self, train: &[Location], base: &Path) -> Result<SpatialBasis> {
        match self.basis {
            BasisName::Coords => Ok(SpatialBasis::Coords),
            BasisName::Tps => Ok(SpatialBasis::Tps(self.knot_set(train, base)?)),
        }
    }

    fn knot_set(&self, train: &[Location], base: &Path) -> Result<KnotSet> {
        if let Some(file) = &self.knot_file {
            return parse_knots(&crate::error::read_to_string(&base.join(file))?);
        }
        let dim = train.first().map_or(0, Location::dim);
        let bbox: Vec<(f64, f64)> = match &self.knot_bbox {
            Some(b) => b.iter().map(|[lo, hi]| (*lo, *hi)).collect(),
            None => (0..dim)
                .map(|d| {
                    train
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l.0[d]), hi.max(l.0[d])))
                })
                .collect(),
        };
        if bbox.len() != dim || self.knots.len() != dim {
            return Err(Error::Config(format!(
                "{dim}-d locations need {dim} knot counts and bounds, got {} and {}",
                self.knots.len(),
                bbox.len()
            )));
        }
        let knots = match &self.knot_mask {
            Some(path) => {
                if dim != 2 {
                    return Err(Error::Config("polygon knot masks need 2-d locations".into()));
                }
                let poly = parse_polygon(&crate::error::read_to_string(&base.join(path))?)?;
                let mask = |l: &Location| poly.contains(l.0[0], l.0[1]);
                knot_lattice(&bbox, &self.knots, Some(&mask))?
            }
            None => knot_lattice(&bbox, &self.knots, None)?,
        };
        Ok(knots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerName,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global-norm clip; 0 disables clipping.
    pub gradient_clip: f64,
    pub per_row_masks: bool,
    /// Early-stopping patience in epochs; 0 disables it.
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: OptimizerName::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            gradient_clip: t.gradient_clip.unwrap_or(0.0),
            per_row_masks: t.per_row_masks,
            patience: 0,
        }
    }
}

impl TrainSection {
    pub fn to_core(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: match self.optimizer {
                OptimizerName::Adam => Optimizer::Adam { beta1: self.beta1, beta2: self.beta2, eps: self.eps },
                OptimizerName::Sgd => Optimizer::Sgd,
            },
            seed,
            gradient_clip: (self.gradient_clip > 0.0).then_some(self.gradient_clip),
            per_row_masks: self.per_row_masks,
            patience: (self.patience > 0).then_some(self.patience),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub m_draws: usize,
    pub level: f64,
    pub y_per_draw: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        let p = PredictConfig::default();
        Self { m_draws: p.m_draws, level: p.level, y_per_draw: p.y_per_draw }
    }
}

impl PredictSection {
    pub fn to_core(&self, seed: u64) -> PredictConfig {
        PredictConfig { m_draws: self.m_draws, level: self.level, y_per_draw: self.y_per_draw, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KrigingModeName {
    #[default]
    Ordinary,
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CountTransformName {
    #[default]
    Log1p,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrigingSection {
    pub n_bins: usize,
    /// Largest lag used in the semivariogram; 0 means half the diameter.
    pub max_dist: f64,
    pub mode: KrigingModeName,
    pub count_transform: CountTransformName,
}

impl Default for KrigingSection {
    fn default() -> Self {
        Self { n_bins: 15, max_dist: 0.0, mode: KrigingModeName::Ordinary, count_transform: CountTransformName::Log1p }
    }
}

impl KrigingSection {
    pub fn to_core(&self, level: f64) -> KrigingOptions {
        KrigingOptions {
            n_bins: self.n_bins,
            max_dist: (self.max_dist > 0.0).then_some(self.max_dist),
            mode: match self.mode {
                KrigingModeName::Ordinary => KrigingMode::Ordinary,
                KrigingModeName::Simple => KrigingMode::Simple,
            },
            count_transform: match self.count_transform {
                CountTransformName::Log1p => CountTransform::Log1p,
                CountTransformName::Identity => CountTransform::Identity,
            },
            level,
        }
    }
}

fn default_replicates() -> usize {
    1
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub case1: Case1Section,
    #[serde(default)]
    pub case2: Case2Section,
    #[serde(default)]
    pub csv: CsvSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub predict: PredictSection,
    #[serde(default)]
    pub kriging: KrigingSection,
    /// Directory relative paths are resolved against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&crate::error::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        match self.data.source {
            Source::Case1 => self.case1.to_core().validate()?,
            Source::Case2 => self.case2.to_core().validate()?,
            Source::Csv => {}
        }
        self.network.architecture()?;
        self.train.to_core(0).validate()?;
        self.predict.to_core(0).validate()?;
        if self.kriging.n_bins < 3 {
            return Err(Error::Config("kriging.n_bins must be at least 3".into()));
        }
        Ok(())
    }

    /// Canonical TOML of the effective settings.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form. The worker count and output directory
    /// never change results and are left out.
    pub fn hash(&self) -> String {
        let mut key = self.clone();
        key.workers = 1;
        key.out_dir = None;
        hex::encode(Sha256::digest(key.canonical().as_bytes()))
    }

    /// Hash of the settings that determine a trained model: seed, data,
    /// embedding, architecture and optimizer. Prediction settings may change
    /// without invalidating a checkpoint.
    pub fn model_hash(&self) -> String {
        #[derive(Serialize)]
        struct ModelKey<'a> {
            seed: u64,
            data: &'a DataSection,
            case1: &'a Case1Section,
            case2: &'a Case2Section,
            network: &'a NetworkSection,
            train: &'a TrainSection,
        }
        let key = ModelKey {
            seed: self.seed,
            data: &self.data,
            case1: &self.case1,
            case2: &self.case2,
            network: &self.network,
            train: &self.train,
        };
        hex::encode(Sha256::digest(toml::to_string(&key).expect("key serializes").as_bytes()))
    }

    pub fn train_size(&self) -> TrainSize {
        match self.data.source {
            Source::Case2 => TrainSize::Fraction(self.case2.train_frac),
            _ => TrainSize::Count(self.case1.train_count),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}
