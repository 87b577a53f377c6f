//! The `train` command: loads a manifest's datasets, runs every
//! (method, seed) pair and writes their artifacts.
//!
//! ```text
//! out/manifest.json        verbatim copy
//! out/model.json           model sizes, for `eval`
//! out/report.{json,csv,txt}, out/f1_by_epoch.csv
//! out/runs/<method>-seed<k>/{history.csv, summary.json, final.ckpt, selected.ckpt}
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use hlad_adapt::{run_experiment, Datasets, ExperimentReport, LocalizationModel, RunResult, RunSummary};
use hlad_core::{checkpoint, ParamSet};
use hlad_metrics::Metrics;

use crate::dataset::DatasetFile;
use crate::error::{IoContext, Result};
use crate::manifest::Manifest;
use crate::report::write_report_files;

pub const HISTORY_HEADER: [&str; 11] =
    ["method", "seed", "epoch", "split", "precision", "recall", "f1", "rmse", "l_m", "l_d_int", "l_d_out"];

pub fn run_dir_name(method: &str, seed: u64) -> String {
    let safe = method.replace('&', "and").replace('+', "plus");
    format!("{safe}-seed{seed}")
}

/// Copy of the localization model's parameters only, so checkpoints load
/// into a bare model.
pub fn model_params(params: &ParamSet<f32>) -> Result<ParamSet<f32>> {
    let mut out = ParamSet::new(params.seed());
    for id in LocalizationModel::param_ids(params) {
        out.insert(params.name(id), params.get(id).clone())?;
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_history<W: Write>(w: W, run: &RunSummary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTORY_HEADER)?;
    for h in &run.history {
        let splits: [(&str, Option<&Metrics>); 2] = [("validation", Some(&h.validation)), ("test", h.test.as_ref())];
        for (split, m) in splits {
            let Some(m) = m else { continue };
            out.write_record([
                run.method.clone(),
                run.seed.to_string(),
                h.epoch.to_string(),
                split.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                opt(m.rmse),
                opt(h.losses.l_m),
                opt(h.losses.l_d_int),
                opt(h.losses.l_d_out),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_run(runs_dir: &Path, run: &RunResult) -> Result<PathBuf> {
    let dir = runs_dir.join(run_dir_name(&run.method, run.seed));
    std::fs::create_dir_all(&dir).at(&dir)?;
    let summary = RunSummary::from(run);
    let hist = dir.join("history.csv");
    write_history(std::fs::File::create(&hist).at(&hist)?, &summary)?;
    let js = dir.join("summary.json");
    std::fs::write(&js, serde_json::to_string_pretty(&summary)? + "\n").at(&js)?;
    checkpoint::save(&model_params(&run.final_params)?, &dir.join("final.ckpt"))?;
    checkpoint::save(&model_params(&run.selected_params)?, &dir.join("selected.ckpt"))?;
    Ok(dir)
}

fn load_optional(path: &Option<PathBuf>, name: &str, evaluation: bool) -> Result<Option<hlad_adapt::Dataset>> {
    path.as_ref()
        .map(|p| {
            let f = DatasetFile::load(p)?;
            if evaluation {
                f.into_evaluation_dataset(name)
            } else {
                f.into_training_dataset(name)
            }
        })
        .transpose()
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub report: ExperimentReport,
}

/// Runs a manifest. `out` overrides the manifest's `output`; with neither,
/// artifacts go to `runs/` beside the manifest.
pub fn cmd_train(manifest_path: &Path, out: Option<&Path>) -> Result<TrainOutcome> {
    let (manifest, text) = Manifest::load(manifest_path)?;
    let out_dir = match (out, &manifest.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => manifest_path.parent().unwrap_or(Path::new(".")).join("runs"),
    };
    let d = &manifest.datasets;
    let source = load_optional(&d.source, "source", false)?;
    let randomized = load_optional(&d.source_randomized, "source_randomized", false)?;
    let target = load_optional(&d.target_train, "target_train", false)?;
    let validation = DatasetFile::load(&d.validation)?.into_evaluation_dataset("validation")?;
    let test = load_optional(&d.test, "test", true)?;
    let data = Datasets {
        source: source.as_ref(),
        source_randomized: randomized.as_ref(),
        target_train: target.as_ref(),
        validation: &validation,
        test: test.as_ref(),
    };
    let (report, runs) = run_experiment(&manifest.specs(), &data, &manifest.config)?;

    std::fs::create_dir_all(&out_dir).at(&out_dir)?;
    let copy = out_dir.join("manifest.json");
    std::fs::write(&copy, &text).at(&copy)?;
    let model = out_dir.join("model.json");
    std::fs::write(&model, serde_json::to_string_pretty(&manifest.config.model)? + "\n").at(&model)?;
    let runs_dir = out_dir.join("runs");
    for r in &runs {
        write_run(&runs_dir, r)?;
    }
    write_report_files(&out_dir, &report)?;
    Ok(TrainOutcome { out_dir, report })
}
