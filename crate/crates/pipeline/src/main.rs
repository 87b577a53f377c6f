use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hlad_adapt::ModelConfig;
use hlad_pipeline::{cmd_eval, cmd_report, cmd_train, generate, EvalOptions, GenConfig};
use hlad_sim::Domain;

#[derive(Parser)]
#[command(name = "hlad", version, about = "Adversarial domain adaptation for multi-source sound localization")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "HLAD_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file.
    Gen {
        /// Simulator/grid JSON; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// source, source_randomized or target_emulated.
        #[arg(long, default_value = "source")]
        domain: Domain,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep positions only in the sealed audit section.
        #[arg(long)]
        unlabeled: bool,
    },
    /// Run every (method, seed) pair of a manifest.
    Train {
        manifest: PathBuf,
        /// Output directory; overrides the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset, printing metrics JSON.
    Eval {
        #[arg(long, required_unless_present = "replay_labels")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = EvalOptions::default().threshold)]
        threshold: f64,
        #[arg(long, default_value_t = EvalOptions::default().match_radius)]
        radius: f64,
        /// Model JSON as written by `train` (model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Score the dataset's positions as predictions.
        #[arg(long)]
        replay_labels: bool,
        /// Include per-record match details.
        #[arg(long)]
        details: bool,
    },
    /// Tabulate one or more train output directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Where to write the merged tables; defaults to the first run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("worker pool")?;
    }
    match cli.command {
        Command::Gen { config, out, count, domain, seed, unlabeled } => {
            let cfg = match config {
                Some(p) => GenConfig::load(&p)?,
                None => GenConfig::default(),
            };
            let file = generate(&cfg, domain, seed, count, !unlabeled)?;
            file.save(&out)?;
            log::info!("wrote {} {} records to {}", count, domain.name(), out.display());
        }
        Command::Train { manifest, out } => {
            let outcome = cmd_train(&manifest, out.as_deref())?;
            print!("{}", hlad_pipeline::results_table(&outcome.report).to_text());
            log::info!("artifacts in {}", outcome.out_dir.display());
        }
        Command::Eval { checkpoint, dataset, threshold, radius, model, replay_labels, details } => {
            let model = model
                .map(|p| -> Result<ModelConfig> {
                    let text = std::fs::read_to_string(&p).with_context(|| p.display().to_string())?;
                    Ok(serde_json::from_str(&text)?)
                })
                .transpose()?;
            let opts = EvalOptions { threshold, match_radius: radius, model, replay_labels, details };
            let report = cmd_eval(checkpoint.as_deref(), &dataset, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Report { runs, out } => {
            let dirs: Vec<&std::path::Path> = runs.iter().map(PathBuf::as_path).collect();
            let out = out.unwrap_or_else(|| runs[0].clone());
            let report = cmd_report(&dirs, &out)?;
            print!("{}", hlad_pipeline::results_table(&report).to_text());
        }
    }
    Ok(())
}
