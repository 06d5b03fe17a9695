//! The five subcommands as library functions; `main` only parses flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mdgp_core::metrics::{score_outcome, MetricRecord};
use mdgp_core::predict::{composite_score, predict, PredictConfig};
use mdgp_core::train::{fit_model, TrainReport};

use crate::bench::{replicate_seeds, run_bench, BenchResult, Simulator};
use crate::checkpoint::{format_checkpoint, read_checkpoint, Checkpoint};
use crate::config::{Method, RunConfig, Source};
use crate::error::write_file;
use crate::formats::dataset::{default_coord_names, format_dataset, read_dataset, CsvDataset};
use crate::formats::prediction::{format_prediction, parse_prediction};
use crate::formats::report::{format_aggregate, format_raw, format_report};
use crate::formats::{csv_line, fmt_f64, header_comment};
use crate::grid::{idw_grid, IDW_NEIGHBOURS, IDW_POWER};
use crate::{Error, Result};

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub level: Option<f64>,
    pub m_draws: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(m) = &self.methods {
            cfg.methods = m.clone();
        }
        if let Some(l) = self.level {
            cfg.predict.level = l;
        }
        if let Some(m) = self.m_draws {
            cfg.predict.m_draws = m;
        }
        cfg.validate()
    }
}

fn manifest_header(cfg: &RunConfig, command: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tool = \"{}\"", env!("CARGO_PKG_NAME"));
    let _ = writeln!(s, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = \"{command}\"");
    let _ = writeln!(s, "config_hash = \"{}\"", cfg.hash());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "replicates = {}", cfg.replicates);
    s
}

fn replicate_manifest(cfg: &RunConfig) -> String {
    let mut s = String::new();
    for i in 0..cfg.replicates {
        let seeds = replicate_seeds(cfg, i);
        let _ = writeln!(
            s,
            "\n[[replicate]]\nindex = {i}\nstream = \"{:016x}\"\ntrain_seed = \"{:016x}\"\npredict_seed = \"{:016x}\"",
            seeds.stream, seeds.train, seeds.predict
        );
    }
    s
}

/// Writes `config.toml` (the effective configuration) and `manifest.toml`.
fn write_provenance(cfg: &RunConfig, out: &Path, command: &str, extra: &str) -> Result<()> {
    write_file(&out.join("config.toml"), &cfg.canonical())?;
    write_file(&out.join("manifest.toml"), &format!("{}{extra}", manifest_header(cfg, command)))
}

/// `rep_000/train.csv`, `rep_000/test.csv`, ... plus provenance files.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if cfg.data.source == Source::Csv {
        return Err(Error::Config("simulate needs data.source = case1 or case2".into()));
    }
    let sim = Simulator::new(cfg)?;
    let comment = header_comment(&cfg.hash(), &[]);
    let mut dirs = Vec::with_capacity(cfg.replicates);
    for i in 0..cfg.replicates {
        let data = sim.replicate(cfg, i)?;
        let dir = out.join(format!("rep_{i:03}"));
        let dim = data.train.spatial_dim();
        for (name, part) in [("train.csv", &data.train), ("test.csv", &data.test)] {
            let csv = CsvDataset {
                dataset: part.clone(),
                coord_names: default_coord_names(dim),
                covariate_names: Vec::new(),
            };
            write_file(&dir.join(name), &format_dataset(&csv, &comment))?;
        }
        dirs.push(dir);
    }
    write_provenance(cfg, out, "simulate", &replicate_manifest(cfg))?;
    Ok(dirs)
}

fn format_train_report(report: &TrainReport, comment: &str) -> String {
    let mut s = String::from(comment);
    s.push_str(&csv_line(["epoch", "loss"]));
    for (e, l) in report.epoch_loss.iter().enumerate() {
        s.push_str(&csv_line([(e + 1).to_string(), fmt_f64(*l)]));
    }
    s
}

/// Fits the network on a dataset CSV; writes `checkpoint.txt` and
/// `train_report.csv`. The training seed is the config's master seed.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<(Checkpoint, TrainReport)> {
    let data = read_dataset(dataset)?;
    let basis = cfg.network.basis(&data.dataset.locations, &cfg.base_dir)?;
    let arch = cfg.network.architecture()?;
    let tcfg = cfg.train.to_core(cfg.seed);
    let start = std::time::Instant::now();
    let (model, mut report) = fit_model(&data.dataset, basis, &arch, &tcfg)?;
    report.wall_seconds = start.elapsed().as_secs_f64();
    let ck = Checkpoint {
        model,
        config_hash: cfg.model_hash(),
        coord_names: data.coord_names.clone(),
        covariate_names: data.covariate_names.clone(),
    };
    write_file(&out.join("checkpoint.txt"), &format_checkpoint(&ck)?)?;
    let comment = header_comment(&cfg.hash(), &[&format!("final_loss={}", fmt_f64(report.final_loss))]);
    write_file(&out.join("train_report.csv"), &format_train_report(&report, &comment))?;
    write_provenance(cfg, out, "train", "")?;
    Ok((ck, report))
}

#[derive(Debug, Clone, Default)]
pub struct PredictOptions {
    /// When present, its model hash must match the checkpoint's.
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub m_draws: Option<usize>,
    pub composite_grid: Option<usize>,
}

/// MC-dropout predictions at the sites of a location CSV; writes
/// `predictions.csv` and, with a grid resolution, `composite.csv` and
/// `composite_grid.csv`.
pub fn cmd_predict(
    checkpoint: &Path,
    locations: &Path,
    out: &Path,
    opts: &PredictOptions,
) -> Result<mdgp_core::predict::Prediction> {
    let ck = read_checkpoint(checkpoint)?;
    let mut pcfg = PredictConfig::default();
    if let Some(cfg) = &opts.config {
        let found = cfg.model_hash();
        if found != ck.config_hash {
            return Err(Error::HashMismatch { expected: ck.config_hash.clone(), found });
        }
        pcfg = cfg.predict.to_core(cfg.seed);
    }
    if let Some(s) = opts.seed {
        pcfg.seed = s;
    }
    if let Some(l) = opts.level {
        pcfg.level = l;
    }
    if let Some(m) = opts.m_draws {
        pcfg.m_draws = m;
    }
    pcfg.validate()?;
    let sites = read_dataset(locations)?;
    let pred = predict(&ck.model, &sites.dataset.locations, sites.dataset.features.as_ref(), &pcfg)?;
    let notes = [format!("m_draws={} level={} seed={}", pcfg.m_draws, fmt_f64(pcfg.level), pcfg.seed)];
    let comment = header_comment(&ck.config_hash, &[notes[0].as_str()]);
    write_file(
        &out.join("predictions.csv"),
        &format_prediction(&pred, &sites.dataset.locations, &sites.coord_names, &comment),
    )?;
    if let Some(res) = opts.composite_grid {
        let surfaces: Vec<Vec<f64>> = (0..pred.outcomes.len()).map(|j| pred.means(j)).collect();
        let score = composite_score(&surfaces)?;
        let mut s = comment.clone();
        s.push_str(&csv_line(["id", "score"]));
        for (i, v) in score.iter().enumerate() {
            s.push_str(&csv_line([i.to_string(), fmt_f64(*v)]));
        }
        write_file(&out.join("composite.csv"), &s)?;
        let grid = idw_grid(&sites.dataset.locations, &score, res, IDW_POWER, IDW_NEIGHBOURS)?;
        let mut g = header_comment(
            &ck.config_hash,
            &[notes[0].as_str(), "inverse-distance interpolation (power 2, 12 neighbours), for display only"],
        );
        g.push_str(&csv_line(["x", "y", "score"]));
        for [x, y, v] in grid {
            g.push_str(&csv_line([fmt_f64(x), fmt_f64(y), fmt_f64(v)]));
        }
        write_file(&out.join("composite_grid.csv"), &g)?;
    }
    Ok(pred)
}

/// Re-scores prediction CSVs against a truth dataset; the method label is
/// each file's stem. Writes `metrics.csv`.
pub fn cmd_eval(truth: &Path, predictions: &[PathBuf], out: &Path) -> Result<Vec<MetricRecord>> {
    let truth = read_dataset(truth)?;
    let d = &truth.dataset;
    let mut records = Vec::new();
    for path in predictions {
        let method = path.file_stem().map_or_else(|| "predictions".into(), |s| s.to_string_lossy().into_owned());
        let table = parse_prediction(&crate::error::read_to_string(path)?)?;
        for (j, spec) in d.outcomes.iter().enumerate() {
            let cells = table.column(&spec.name, d.len())?;
            let y: Vec<Option<f64>> = d.responses.iter().map(|r| r[j]).collect();
            records.extend(score_outcome(&method, &spec.name, spec.kind, &y, &cells)?);
        }
    }
    let mut s = header_comment("-", &[]);
    s.push_str(&csv_line(["method", "outcome", "metric", "value"]));
    for r in &records {
        s.push_str(&csv_line([r.method.clone(), r.outcome.clone(), r.metric.as_str().to_string(), fmt_f64(r.value)]));
    }
    write_file(&out.join("metrics.csv"), &s)?;
    Ok(records)
}

/// Runs the benchmark and writes `report.csv`, `aggregate.csv`,
/// `raw_metrics.csv`, `diagnostics.csv`, `failures.csv` and provenance.
/// Wall-clock times go to `timing.csv` only, keeping every other file
/// reproducible byte for byte.
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<BenchResult> {
    let result = run_bench(cfg)?;
    let comment = header_comment(&cfg.hash(), &[]);
    if let Some(report) = &result.report {
        write_file(&out.join("report.csv"), &format_report(report, &comment))?;
        write_file(&out.join("aggregate.csv"), &format_aggregate(report, &comment))?;
    }
    write_file(&out.join("raw_metrics.csv"), &format_raw(&result.raw_records(), &comment))?;

    let mut diag = comment.clone();
    diag.push_str(&csv_line(["replicate", "method", "name", "value"]));
    let mut timing = comment.clone();
    timing.push_str(&csv_line(["replicate", "method", "seconds"]));
    let mut failures = comment.clone();
    failures.push_str(&csv_line(["replicate", "error"]));
    for (i, r) in result.replicates.iter().enumerate() {
        match r {
            Ok(r) => {
                for (m, name, v) in &r.diagnostics {
                    diag.push_str(&csv_line([i.to_string(), m.as_str().to_string(), name.clone(), fmt_f64(*v)]));
                }
                for (m, secs) in &r.timings {
                    timing.push_str(&csv_line([i.to_string(), m.as_str().to_string(), fmt_f64(*secs)]));
                }
            }
            Err(e) => failures.push_str(&csv_line([i.to_string(), e.clone()])),
        }
    }
    if let Some(t) = &result.timing {
        for row in &t.rows {
            timing.push_str(&csv_line(["mean".to_string(), row.method.clone(), fmt_f64(row.mean)]));
            timing.push_str(&csv_line(["sd".to_string(), row.method.clone(), fmt_f64(row.sd)]));
        }
    }
    write_file(&out.join("diagnostics.csv"), &diag)?;
    write_file(&out.join("timing.csv"), &timing)?;
    write_file(&out.join("failures.csv"), &failures)?;
    write_provenance(cfg, out, "bench", &replicate_manifest(cfg))?;
    let failed = result.failures();
    if failed > 0 {
        return Err(Error::ReplicatesFailed { failed, total: cfg.replicates });
    }
    Ok(result)
}
