//! Multi-seed runs of several methods and their mean ± std aggregates.

use hlad_metrics::Metrics;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingConfig;
use crate::error::{AdaptError, Result};
use crate::method::MethodSpec;
use crate::train::{train_method, Datasets, EpochRecord, RunResult};

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Over the seeds that produced at least one match.
    pub rmse: Option<MeanStd>,
}

impl MetricSummary {
    pub fn of(metrics: &[&Metrics]) -> Option<Self> {
        let col = |f: fn(&Metrics) -> f64| MeanStd::of(&metrics.iter().map(|m| f(m)).collect::<Vec<_>>());
        let rmse: Vec<f64> = metrics.iter().filter_map(|m| m.rmse).collect();
        Some(Self {
            precision: col(|m| m.precision)?,
            recall: col(|m| m.recall)?,
            f1: col(|m| m.f1)?,
            rmse: MeanStd::of(&rmse),
        })
    }
}

/// Serializable outcome of one (method, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub selected_epoch: usize,
    pub final_test: Option<Metrics>,
    pub selected_test: Option<Metrics>,
    pub history: Vec<EpochRecord>,
}

impl RunSummary {
    pub fn final_validation(&self) -> Option<&Metrics> {
        self.history.last().map(|r| &r.validation)
    }

    pub fn selected_validation(&self) -> Option<&Metrics> {
        self.history.get(self.selected_epoch).map(|r| &r.validation)
    }
}

impl From<&RunResult> for RunSummary {
    fn from(r: &RunResult) -> Self {
        Self {
            method: r.method.clone(),
            seed: r.seed,
            selected_epoch: r.selected_epoch,
            final_test: r.final_test,
            selected_test: r.selected_test,
            history: r.history.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochCurvePoint {
    pub epoch: usize,
    pub validation_f1: MeanStd,
    pub test_f1: Option<MeanStd>,
}

/// Per-method row of the results tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub seeds: Vec<u64>,
    #[serde(rename = "final")]
    pub final_test: Option<MetricSummary>,
    #[serde(rename = "selected")]
    pub selected_test: Option<MetricSummary>,
    pub final_validation: Option<MetricSummary>,
    pub selected_validation: Option<MetricSummary>,
    pub curve: Vec<EpochCurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: TrainingConfig,
    pub methods: Vec<MethodSummary>,
    pub runs: Vec<RunSummary>,
}

fn summarize(method: &str, runs: &[&RunSummary]) -> MethodSummary {
    let pick = |f: fn(&RunSummary) -> Option<&Metrics>| -> Option<MetricSummary> {
        let ms: Vec<&Metrics> = runs.iter().filter_map(|r| f(r)).collect();
        (ms.len() == runs.len()).then(|| MetricSummary::of(&ms)).flatten()
    };
    let epochs = runs.iter().map(|r| r.history.len()).min().unwrap_or(0);
    let curve = (0..epochs)
        .filter_map(|e| {
            let val: Vec<f64> = runs.iter().map(|r| r.history[e].validation.f1).collect();
            let test: Vec<f64> = runs.iter().filter_map(|r| r.history[e].test.as_ref().map(|m| m.f1)).collect();
            Some(EpochCurvePoint {
                epoch: e,
                validation_f1: MeanStd::of(&val)?,
                test_f1: (test.len() == runs.len()).then(|| MeanStd::of(&test)).flatten(),
            })
        })
        .collect();
    MethodSummary {
        method: method.to_string(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        final_test: pick(|r| r.final_test.as_ref()),
        selected_test: pick(|r| r.selected_test.as_ref()),
        final_validation: pick(RunSummary::final_validation),
        selected_validation: pick(RunSummary::selected_validation),
        curve,
    }
}

impl ExperimentReport {
    /// Aggregates runs per method, in order of first appearance. Runs are
    /// sorted by seed first so the aggregates do not depend on run order.
    pub fn from_runs(config: TrainingConfig, runs: Vec<RunSummary>) -> Self {
        let mut runs = runs;
        let mut order: Vec<String> = Vec::new();
        for r in &runs {
            if !order.contains(&r.method) {
                order.push(r.method.clone());
            }
        }
        runs.sort_by(|a, b| {
            let pos = |m: &str| order.iter().position(|o| o == m);
            pos(&a.method).cmp(&pos(&b.method)).then(a.seed.cmp(&b.seed))
        });
        let methods = order
            .iter()
            .map(|m| {
                let rs: Vec<&RunSummary> = runs.iter().filter(|r| &r.method == m).collect();
                summarize(m, &rs)
            })
            .collect();
        Self { config, methods, runs }
    }

    pub fn method(&self, id: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == id)
    }
}

/// Trains every (method, seed) pair, in parallel on the current rayon pool.
/// Runs share no mutable state, so results do not depend on scheduling.
pub fn run_experiment(methods: &[MethodSpec], data: &Datasets<'_>, config: &TrainingConfig) -> Result<(ExperimentReport, Vec<RunResult>)> {
    config.validate()?;
    if methods.is_empty() {
        return Err(AdaptError::Config("no methods given".into()));
    }
    let jobs: Vec<(&MethodSpec, u64)> =
        methods.iter().flat_map(|m| config.seeds.iter().map(move |&s| (m, s))).collect();
    let runs: Vec<RunResult> =
        jobs.par_iter().map(|&(m, s)| train_method(m, data, config, s)).collect::<Result<_>>()?;
    let summaries = runs.iter().map(RunSummary::from).collect();
    Ok((ExperimentReport::from_runs(config.clone(), summaries), runs))
}
