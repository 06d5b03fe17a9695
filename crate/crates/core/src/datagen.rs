//! Simulation designs, splitting, knot lattices and thin-plate-spline features.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::special::logistic;
use crate::numerics::{cholesky_with_jitter, exp_cov, mvn_sample, DenseMatrix, RngStream};
use crate::{Error, Result};

/// A point in the spatial domain (1 or 2 coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct Location(pub Vec<f64>);

impl Location {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Planar Euclidean distance.
    pub fn distance(&self, other: &Location) -> f64 {
        libm::sqrt(self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeKind {
    Binary,
    Count,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logit,
    Log,
    Identity,
}

impl OutcomeKind {
    /// Canonical link of the kind; the pairing is fixed.
    pub fn link(self) -> Link {
        match self {
            OutcomeKind::Binary => Link::Logit,
            OutcomeKind::Count => Link::Log,
            OutcomeKind::Continuous => Link::Identity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Binary => "binary",
            OutcomeKind::Count => "count",
            OutcomeKind::Continuous => "continuous",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binary" => Some(OutcomeKind::Binary),
            "count" => Some(OutcomeKind::Count),
            "continuous" => Some(OutcomeKind::Continuous),
            _ => None,
        }
    }

    /// Checks that `y` lies in the support of the kind.
    pub fn validate(self, y: f64) -> bool {
        y.is_finite()
            && match self {
                OutcomeKind::Binary => y == 0.0 || y == 1.0,
                OutcomeKind::Count => y >= 0.0 && libm::floor(y) == y,
                OutcomeKind::Continuous => true,
            }
    }

    /// Inverse of the canonical link.
    #[inline]
    pub fn mean_from_eta(self, eta: f64) -> f64 {
        match self {
            OutcomeKind::Binary => logistic(eta),
            OutcomeKind::Count => libm::exp(eta),
            OutcomeKind::Continuous => eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpec {
    pub name: String,
    pub kind: OutcomeKind,
}

impl OutcomeSpec {
    pub fn new(name: impl Into<String>, kind: OutcomeKind) -> Self {
        Self { name: name.into(), kind }
    }

    pub fn link(&self) -> Link {
        self.kind.link()
    }
}

/// Locations with a (possibly incomplete) mixed response table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub locations: Vec<Location>,
    pub outcomes: Vec<OutcomeSpec>,
    /// `responses[i][j]` is outcome `j` at location `i`.
    pub responses: Vec<Vec<Option<f64>>>,
    /// Exogenous covariates, one row per location.
    pub features: Option<DenseMatrix>,
}

impl Dataset {
    pub fn new(
        locations: Vec<Location>,
        outcomes: Vec<OutcomeSpec>,
        responses: Vec<Vec<Option<f64>>>,
        features: Option<DenseMatrix>,
    ) -> Result<Self> {
        let data = Self { locations, outcomes, responses, features };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.locations.len();
        if self.responses.len() != n {
            return Err(Error::DimensionMismatch(format!("{n} locations but {} response rows", self.responses.len())));
        }
        if let Some(dim) = self.locations.first().map(Location::dim) {
            if self.locations.iter().any(|l| l.dim() != dim || l.0.iter().any(|c| !c.is_finite())) {
                return Err(Error::DimensionMismatch("inconsistent or non-finite coordinates".into()));
            }
        }
        if let Some(f) = &self.features {
            if f.rows() != n || !f.is_finite() {
                return Err(Error::DimensionMismatch(format!("{} covariate rows for {n} locations", f.rows())));
            }
        }
        for row in &self.responses {
            if row.len() != self.outcomes.len() {
                return Err(Error::DimensionMismatch(format!(
                    "response row of length {} for {} outcomes",
                    row.len(),
                    self.outcomes.len()
                )));
            }
            for (cell, spec) in row.iter().zip(&self.outcomes) {
                if let Some(y) = *cell {
                    if !spec.kind.validate(y) {
                        return Err(Error::InvalidResponse { outcome: spec.name.clone(), value: y });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn spatial_dim(&self) -> usize {
        self.locations.first().map_or(0, Location::dim)
    }

    pub fn covariate_dim(&self) -> usize {
        self.features.as_ref().map_or(0, DenseMatrix::cols)
    }

    pub fn outcome_index(&self, name: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.name == name)
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            locations: idx.iter().map(|&i| self.locations[i].clone()).collect(),
            outcomes: self.outcomes.clone(),
            responses: idx.iter().map(|&i| self.responses[i].clone()).collect(),
            features: self
                .features
                .as_ref()
                .map(|f| DenseMatrix::from_fn(idx.len(), f.cols(), |r, c| f.get(idx[r], c))),
        }
    }

    /// Observed cells of outcome `j` as `(row, value)` pairs.
    pub fn observed(&self, j: usize) -> Vec<(usize, f64)> {
        self.responses.iter().enumerate().filter_map(|(i, r)| r[j].map(|y| (i, y))).collect()
    }
}

/// One-dimensional stationary GP design.
#[derive(Debug, Clone, PartialEq)]
pub struct Case1Config {
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

impl Default for Case1Config {
    fn default() -> Self {
        Self {
            n: 1000,
            mu: 1.0,
            sigma2: 1.0,
            rho: 0.1,
            tau2: 0.01,
            c: 1.0,
            kappa: 0.35,
            alpha: -0.25,
            beta: 0.60,
            train_count: 800,
        }
    }
}

impl Case1Config {
    pub fn validate(&self) -> Result<()> {
        let positive = [("sigma2", self.sigma2), ("rho", self.rho), ("tau2", self.tau2), ("kappa", self.kappa)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("case1.{name} must be positive, got {v}")));
            }
        }
        if self.n < 2 || self.train_count == 0 || self.train_count >= self.n {
            return Err(Error::InvalidConfig(format!(
                "case1 needs 0 < train_count < n (n = {}, train_count = {})",
                self.n, self.train_count
            )));
        }
        Ok(())
    }
}

/// How Case 2 places its locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// i.i.d. uniform on the unit square.
    #[default]
    Uniform,
    /// Regular ⌈√n⌉ × ⌈√n⌉ grid truncated to `n` points (visualization).
    Grid,
}

/// Two-dimensional nonstationary surface design.
#[derive(Debug, Clone, PartialEq)]
pub struct Case2Config {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub train_frac: f64,
    pub layout: Layout,
}

impl Default for Case2Config {
    fn default() -> Self {
        Self { n: 900, alpha: 0.5, beta: 3.0, sigma2: 0.25, train_frac: 0.8, layout: Layout::Uniform }
    }
}

impl Case2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("case2.n must be at least 2".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig("case2.sigma2 must be positive".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidConfig("case2.train_frac must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// A simulated dataset plus the generating truth (never shown to models).
#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: Dataset,
    /// Latent signal: `z(s)` for Case 1, `η(s)` for Case 2.
    pub latent: Vec<f64>,
    /// True success probability of the binary outcome.
    pub binary_prob: Vec<f64>,
}

fn simulation_outcomes() -> Vec<OutcomeSpec> {
    vec![
        OutcomeSpec::new("binary", OutcomeKind::Binary),
        OutcomeSpec::new("count", OutcomeKind::Count),
        OutcomeSpec::new("continuous", OutcomeKind::Continuous),
    ]
}

// sub-stream ids inside one simulation
const STREAM_FIELD: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_BINARY: u64 = 2;
const STREAM_COUNT: u64 = 3;
const STREAM_LOCATIONS: u64 = 4;

/// Equally spaced 1-D GP with binary, count and continuous read-outs.
pub fn simulate_case1(config: &Case1Config, rng: &RngStream) -> Result<Simulated> {
    Case1Sampler::new(config)?.sample(rng)
}

/// Case 1 generator with the GP covariance factored once, for replicates.
#[derive(Debug, Clone)]
pub struct Case1Sampler {
    config: Case1Config,
    sites: Vec<f64>,
    chol: DenseMatrix,
}

impl Case1Sampler {
    pub fn new(config: &Case1Config) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        let sites: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let cov = DenseMatrix::from_fn(n, n, |i, j| exp_cov((sites[i] - sites[j]).abs(), config.sigma2, config.rho));
        let chol = cholesky_with_jitter(&cov)?;
        Ok(Self { config: config.clone(), sites, chol })
    }

    pub fn sample(&self, rng: &RngStream) -> Result<Simulated> {
        let config = &self.config;
        let n = config.n;
        let nu = mvn_sample(&vec![0.0; n], &self.chol, &mut rng.split(STREAM_FIELD))?;
        let mut noise = rng.split(STREAM_NOISE);
        let sd_eps = libm::sqrt(config.tau2);
        let z: Vec<f64> = nu.iter().map(|v| config.mu + v + sd_eps * noise.normal()).collect();

        let mut bin_rng = rng.split(STREAM_BINARY);
        let mut count_rng = rng.split(STREAM_COUNT);
        let mut responses = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for &zi in &z {
            let p = logistic((zi - config.c) / config.kappa);
            let b = if bin_rng.bernoulli(p) { 1.0 } else { 0.0 };
            let y = count_rng.poisson(libm::exp(config.alpha + config.beta * zi)) as f64;
            probs.push(p);
            responses.push(vec![Some(b), Some(y), Some(zi)]);
        }
        let locations = self.sites.iter().map(|&s| Location(vec![s])).collect();
        Ok(Simulated {
            dataset: Dataset::new(locations, simulation_outcomes(), responses, None)?,
            latent: z,
            binary_prob: probs,
        })
    }
}

/// The nonstationary Case 2 surface at `s̄ = (s_x + s_y) / 2`.
#[inline]
pub fn case2_surface(sbar: f64) -> f64 {
    let d = sbar - 0.9;
    libm::sin(30.0 * d * d * d * d) * libm::cos(2.0 * d) + d / 2.0
}

/// 2-D nonstationary surface with binary, count and continuous read-outs.
pub fn simulate_case2(config: &Case2Config, rng: &RngStream) -> Result<Simulated> {
    config.validate()?;
    let n = config.n;
    let locations: Vec<Location> = match config.layout {
        Layout::Uniform => {
            let mut loc_rng = rng.split(STREAM_LOCATIONS);
            (0..n).map(|_| Location(vec![loc_rng.uniform(), loc_rng.uniform()])).collect()
        }
        Layout::Grid => {
            let side = libm::ceil(libm::sqrt(n as f64)) as usize;
            let step = 1.0 / (side.max(2) - 1) as f64;
            (0..n).map(|i| Location(vec![(i % side) as f64 * step, (i / side) as f64 * step])).collect()
        }
    };
    let mut noise = rng.split(STREAM_NOISE);
    let mut bin_rng = rng.split(STREAM_BINARY);
    let mut count_rng = rng.split(STREAM_COUNT);
    let sd = libm::sqrt(config.sigma2);
    let mut responses = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for loc in &locations {
        let sbar = 0.5 * (loc.0[0] + loc.0[1]);
        let eta = config.alpha + config.beta * case2_surface(sbar);
        let p = logistic(eta);
        let y = count_rng.poisson(libm::exp(eta)) as f64;
        let b = if bin_rng.bernoulli(p) { 1.0 } else { 0.0 };
        let cont = eta + sd * noise.normal();
        etas.push(eta);
        probs.push(p);
        responses.push(vec![Some(b), Some(y), Some(cont)]);
    }
    Ok(Simulated {
        dataset: Dataset::new(locations, simulation_outcomes(), responses, None)?,
        latent: etas,
        binary_prob: probs,
    })
}

/// Requested training-set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainSize {
    Count(usize),
    /// Fraction of rows; the count is `round(frac · n)`.
    Fraction(f64),
}

impl TrainSize {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            TrainSize::Count(k) => k,
            TrainSize::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::OutOfRange(format!("train fraction {f}")));
                }
                libm::round(f * n as f64) as usize
            }
        };
        if k == 0 || k >= n {
            return Err(Error::OutOfRange(format!("train size {k} for {n} rows")));
        }
        Ok(k)
    }
}

/// Train/test partition together with the original row indices.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Uniform random partition without replacement. Index lists are sorted.
pub fn split(data: &Dataset, size: TrainSize, rng: &RngStream) -> Result<Split> {
    let n = data.len();
    let k = size.resolve(n)?;
    let perm = rng.clone().permutation(n);
    let mut train_idx = perm[..k].to_vec();
    let mut test_idx = perm[k..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split { train: data.subset(&train_idx), test: data.subset(&test_idx), train_idx, test_idx })
}

/// Regular lattice of candidate knots.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSet {
    pub knots: Vec<Location>,
    /// Points per axis of the generating lattice.
    pub grid: Vec<usize>,
    /// `(min, max)` per axis of the generating lattice.
    pub bbox: Vec<(f64, f64)>,
}

impl KnotSet {
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

/// Lattice over `bbox` with `grid[d]` points on axis `d`, edges included.
///
/// Knots are ordered lexicographically with axis 0 varying slowest; those for
/// which `mask` returns `false` are dropped.
pub fn knot_lattice(bbox: &[(f64, f64)], grid: &[usize], mask: Option<&dyn Fn(&Location) -> bool>) -> Result<KnotSet> {
    if bbox.is_empty() || bbox.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} bounding intervals for {} grid axes",
            bbox.len(),
            grid.len()
        )));
    }
    if grid.iter().any(|&g| g < 2) {
        return Err(Error::InvalidConfig("knot grid needs at least 2 points per axis".to_string()));
    }
    let total: usize = grid.iter().product();
    let mut knots = Vec::with_capacity(total);
    let mut idx = vec![0usize; grid.len()];
    for _ in 0..total {
        let coords = idx
            .iter()
            .zip(bbox.iter().zip(grid))
            .map(|(&i, (&(lo, hi), &g))| lo + (hi - lo) * i as f64 / (g - 1) as f64)
            .collect();
        let loc = Location(coords);
        if mask.is_none_or(|m| m(&loc)) {
            knots.push(loc);
        }
        for d in (0..grid.len()).rev() {
            idx[d] += 1;
            if idx[d] < grid[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    if knots.is_empty() {
        return Err(Error::EmptyInput("no knots survive the mask"));
    }
    Ok(KnotSet { knots, grid: grid.to_vec(), bbox: bbox.to_vec() })
}

/// Thin-plate-spline radial basis `r² log r`, continuously extended by 0 at r = 0.
#[inline]
pub fn tps_basis(r: f64) -> f64 {
    if r > 0.0 {
        r * r * libm::log(r)
    } else {
        0.0
    }
}

/// `features[i][j] = tps_basis(‖locations[i] − knots[j]‖)`.
pub fn tps_features(locations: &[Location], knots: &KnotSet) -> Result<DenseMatrix> {
    if let (Some(l), Some(k)) = (locations.first(), knots.knots.first()) {
        if l.dim() != k.dim() {
            return Err(Error::DimensionMismatch(format!("{}-d locations against {}-d knots", l.dim(), k.dim())));
        }
    }
    Ok(DenseMatrix::from_fn(locations.len(), knots.len(), |i, j| tps_basis(locations[i].distance(&knots.knots[j]))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_variance(xs: &[f64]) -> f64 {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    }

    #[test]
    fn case1_degenerate_variance() {
        let cfg = Case1Config { sigma2: 1e-20, tau2: 1e-20, n: 50, train_count: 40, ..Default::default() };
        let sim = simulate_case1(&cfg, &RngStream::new(1, 0)).unwrap();
        for (row, p) in sim.dataset.responses.iter().zip(&sim.binary_prob) {
            assert!((row[2].unwrap() - 1.0).abs() < 1e-6);
            assert!((p - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn case1_intensity_at_latent_mean() {
        let cfg = Case1Config::default();
        let lambda = libm::exp(cfg.alpha + cfg.beta * 1.0);
        assert!((lambda - 1.419_067_548_593_257).abs() < 1e-12);
    }

    #[test]
    fn case1_marginal_variance_band() {
        let sim = simulate_case1(&Case1Config::default(), &RngStream::new(77, 0)).unwrap();
        let y: Vec<f64> = sim.dataset.responses.iter().map(|r| r[2].unwrap()).collect();
        let v = sample_variance(&y);
        assert!((0.6..=1.5).contains(&v), "variance {v}");
        assert_eq!(sim.dataset.len(), 1000);
        assert!(sim.dataset.responses.iter().all(|r| r.iter().all(Option::is_some)));
    }

    #[test]
    fn case1_class_balance_over_replicates() {
        let sampler = Case1Sampler::new(&Case1Config::default()).unwrap();
        let master = RngStream::new(2025, 0);
        let mut balance = 0.0;
        for r in 0..200 {
            let sim = sampler.sample(&master.split(r)).unwrap();
            let ones = sim.dataset.responses.iter().filter(|row| row[0] == Some(1.0)).count();
            balance += ones as f64 / 1000.0 / 200.0;
        }
        assert!((0.40..=0.60).contains(&balance), "balance {balance}");
    }

    #[test]
    fn case1_spacing() {
        let cfg = Case1Config { n: 11, train_count: 8, ..Default::default() };
        let sim = simulate_case1(&cfg, &RngStream::new(0, 0)).unwrap();
        assert_eq!(sim.dataset.locations[0].0[0], 0.0);
        assert_eq!(sim.dataset.locations[10].0[0], 1.0);
        assert!((sim.dataset.locations[3].0[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn case2_surface_values() {
        assert_eq!(case2_surface(0.9), 0.0);
        assert_eq!(0.5 + 3.0 * case2_surface(0.9), 0.5);
        // independent evaluation: sin(30·0.9⁴)·cos(1.8) − 0.45
        let want = libm::sin(19.683) * libm::cos(1.8) - 0.45;
        assert!((case2_surface(0.0) - want).abs() < 1e-15);
        assert!((case2_surface(0.0) - (-0.6182)).abs() < 5e-4);
    }

    #[test]
    fn case2_surface_matches_scalar_grid() {
        // independently coded closed form, powi/powf based
        fn reference(sx: f64, sy: f64) -> f64 {
            let sbar = (sx + sy) / 2.0;
            (30.0 * (sbar - 0.9f64).powi(4)).sin() * (2.0 * (sbar - 0.9)).cos() + (sbar - 0.9) / 2.0
        }
        for i in 0..=100 {
            for j in 0..=100 {
                let (sx, sy) = (i as f64 / 100.0, j as f64 / 100.0);
                let got = case2_surface(0.5 * (sx + sy));
                assert!((got - reference(sx, sy)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn case2_noiseless_limit() {
        let cfg = Case2Config { sigma2: 1e-300, n: 100, ..Default::default() };
        let sim = simulate_case2(&cfg, &RngStream::new(4, 0)).unwrap();
        for (row, eta) in sim.dataset.responses.iter().zip(&sim.latent) {
            assert!((row[2].unwrap() - eta).abs() < 1e-100);
        }
        assert!(sim.dataset.locations.iter().all(|l| l.0.iter().all(|c| (0.0..=1.0).contains(c))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let sim = simulate_case1(&Case1Config::default(), &RngStream::new(5, 0)).unwrap();
        let rng = RngStream::new(5, 1);
        let s = split(&sim.dataset, TrainSize::Count(800), &rng).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (800, 200));
        assert!(s.train_idx.iter().all(|i| s.test_idx.binary_search(i).is_err()));
        let again = split(&sim.dataset, TrainSize::Count(800), &rng).unwrap();
        assert_eq!(s.train_idx, again.train_idx);

        assert_eq!(TrainSize::Fraction(0.8).resolve(900).unwrap(), 720);
        assert_eq!(TrainSize::Fraction(0.999).resolve(900).unwrap(), 899);
        assert!(TrainSize::Fraction(0.9999).resolve(900).is_err());
        assert!(TrainSize::Count(0).resolve(10).is_err());
        assert!(TrainSize::Count(10).resolve(10).is_err());
    }

    #[test]
    fn knot_lattice_cardinality_and_corners() {
        let k = knot_lattice(&[(0.0, 1.0), (0.0, 1.0)], &[25, 25], None).unwrap();
        assert_eq!(k.len(), 625);
        let c = knot_lattice(&[(0.0, 1.0), (0.0, 1.0)], &[2, 2], None).unwrap();
        let want = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        for (got, w) in c.knots.iter().zip(want) {
            assert_eq!(got.0, w);
        }
    }

    #[test]
    fn knot_lattice_half_plane_mask() {
        let mask = |l: &Location| l.0[0] < 0.5;
        let k = knot_lattice(&[(0.0, 1.0), (0.0, 1.0)], &[25, 25], Some(&mask)).unwrap();
        // columns 0..=11 of 25 lie strictly below the midline
        assert_eq!(k.len(), 12 * 25);
        assert!(k.knots.iter().all(|l| l.0[0] < 0.5));
        let none = |_: &Location| false;
        assert!(knot_lattice(&[(0.0, 1.0)], &[5], Some(&none)).is_err());
        assert!(knot_lattice(&[(0.0, 1.0)], &[1], None).is_err());
    }

    #[test]
    fn tps_values() {
        assert_eq!(tps_basis(1.0), 0.0);
        assert_eq!(tps_basis(0.0), 0.0);
        let e = core::f64::consts::E;
        assert!((tps_basis(e) - e * e).abs() < 1e-12);
        let knots = KnotSet { knots: vec![Location(vec![0.0, 0.0])], grid: vec![1, 1], bbox: vec![] };
        let x = tps_features(&[Location(vec![3.0, 4.0])], &knots).unwrap();
        assert!((x.get(0, 0) - 25.0 * libm::log(5.0)).abs() < 1e-12);
        assert!(tps_features(&[Location(vec![1.0])], &knots).is_err());
    }

    proptest! {
        #[test]
        #[allow(clippy::needless_range_loop)]
        fn tps_permutation_equivariant(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 0);
            let locs: Vec<Location> = (0..6).map(|_| Location(vec![3.0 * rng.uniform(), 3.0 * rng.uniform()])).collect();
            let knots = knot_lattice(&[(0.0, 3.0), (0.0, 3.0)], &[3, 3], None).unwrap();
            let x = tps_features(&locs, &knots).unwrap();
            let lp = rng.permutation(6);
            let kp = rng.permutation(9);
            let plocs: Vec<Location> = lp.iter().map(|&i| locs[i].clone()).collect();
            let pknots = KnotSet { knots: kp.iter().map(|&j| knots.knots[j].clone()).collect(), ..knots.clone() };
            let y = tps_features(&plocs, &pknots).unwrap();
            for a in 0..6 {
                for b in 0..9 {
                    prop_assert_eq!(y.get(a, b), x.get(lp[a], kp[b]));
                    let r = plocs[a].distance(&pknots.knots[b]);
                    if r >= 1.0 {
                        prop_assert!(y.get(a, b) >= 0.0);
                    }
                }
            }
        }

        #[test]
        fn split_union_is_permutation(seed in any::<u64>(), n in 3usize..60) {
            let cfg = Case2Config { n, ..Default::default() };
            let sim = simulate_case2(&cfg, &RngStream::new(seed, 0)).unwrap();
            let s = split(&sim.dataset, TrainSize::Count(n / 2), &RngStream::new(seed, 1)).unwrap();
            let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for (row, &i) in s.train.responses.iter().zip(&s.train_idx) {
                prop_assert_eq!(row, &sim.dataset.responses[i]);
            }
        }
    }
}
