use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdgp::commands::{cmd_bench, cmd_eval, cmd_predict, cmd_simulate, cmd_train, Overrides, PredictOptions};
use mdgp::config::{Method, RunConfig};

#[derive(Parser)]
#[command(name = "mdgp", version, about = "Multi-outcome deep spatial models with MC-dropout uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to `out_dir` in the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated train/test pairs per replicate.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Fit the network on a dataset CSV and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
    },
    /// Predict at the sites of a location CSV from a checkpoint.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long = "m-draws")]
        m_draws: Option<usize>,
        /// Also write an N×N inverse-distance grid of the composite score.
        #[arg(long = "composite-grid", value_name = "N")]
        composite_grid: Option<usize>,
        checkpoint: PathBuf,
        locations: PathBuf,
    },
    /// Run the replicate benchmark and write the metric report.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated subset of deepgp,dnn,kriging.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long = "m-draws")]
        m_draws: Option<usize>,
    },
    /// Re-score prediction CSVs against a truth dataset.
    Eval {
        #[arg(long)]
        out: Option<PathBuf>,
        truth: PathBuf,
        #[arg(required = true)]
        predictions: Vec<PathBuf>,
    },
}

fn load(common: &Common, overrides: &Overrides) -> mdgp::Result<(RunConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg)?;
    let out = common.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run(cli: Cli) -> mdgp::Result<()> {
    match cli.command {
        Command::Simulate { common, replicates } => {
            let (cfg, out) = load(&common, &Overrides { seed: common.seed, replicates, ..Default::default() })?;
            let dirs = cmd_simulate(&cfg, &out)?;
            eprintln!("wrote {} replicate pairs under {}", dirs.len(), out.display());
        }
        Command::Train { common, dataset } => {
            let (cfg, out) = load(&common, &Overrides { seed: common.seed, ..Default::default() })?;
            let (_, report) = cmd_train(&cfg, &dataset, &out)?;
            eprintln!(
                "trained {} epochs, final loss {:.4}; checkpoint in {}",
                report.epoch_loss.len(),
                report.final_loss,
                out.display()
            );
        }
        Command::Predict { common, level, m_draws, composite_grid, checkpoint, locations } => {
            let config = common.config.as_deref().map(RunConfig::load).transpose()?;
            let out = common
                .out
                .clone()
                .or_else(|| config.as_ref().and_then(|c| c.out_dir.clone()))
                .unwrap_or_else(|| PathBuf::from("out"));
            let opts = PredictOptions { config, seed: common.seed, level, m_draws, composite_grid };
            let pred = cmd_predict(&checkpoint, &locations, &out, &opts)?;
            eprintln!("predicted {} locations into {}", pred.len(), out.display());
        }
        Command::Bench { common, replicates, workers, methods, level, m_draws } => {
            let methods: Option<Vec<Method>> = methods.as_deref().map(Method::parse_list).transpose()?;
            let overrides = Overrides { seed: common.seed, replicates, workers, methods, level, m_draws };
            let (cfg, out) = load(&common, &overrides)?;
            let result = cmd_bench(&cfg, &out)?;
            eprintln!("{} replicates scored; report in {}", result.replicates.len(), out.join("report.csv").display());
        }
        Command::Eval { out, truth, predictions } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            let records = cmd_eval(&truth, &predictions, &out)?;
            for r in &records {
                println!("{},{},{},{}", r.method, r.outcome, r.metric.as_str(), r.value);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
