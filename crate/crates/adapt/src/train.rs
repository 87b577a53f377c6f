//! Epoch loop, model selection and evaluation of one (method, seed) run.

use hlad_core::rng::{name_stream, stream_rng};
use hlad_core::{Executor, Graph, ParamSet, Scalar};
use hlad_metrics::{extract_keypoints, match_keypoints, metrics, Heatmap, MatchReport, Metrics, Position};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainingConfig;
use crate::data::{labeled_batch, unlabeled_batch, Dataset, DomainBatch, UnlabeledView};
use crate::error::{AdaptError, Result};
use crate::method::{LabeledSource, MethodSpec};
use crate::model::{Level, LocalizationModel};
use crate::trainer::{StepReport, Trainer};

/// Records per inference graph during evaluation.
pub const EVAL_CHUNK: usize = 64;

/// The splits a run may draw from. Which ones are required depends on the
/// method; `validation` must always be labeled.
#[derive(Clone, Copy, Debug)]
pub struct Datasets<'a> {
    pub source: Option<&'a Dataset>,
    pub source_randomized: Option<&'a Dataset>,
    pub target_train: Option<&'a Dataset>,
    pub validation: &'a Dataset,
    pub test: Option<&'a Dataset>,
}

/// Mean training losses over an epoch's steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub l_m: Option<f64>,
    pub l_d_int: Option<f64>,
    pub l_d_out: Option<f64>,
    pub l_a_int: Option<f64>,
    pub l_a_out: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0-based.
    pub epoch: usize,
    pub steps: usize,
    pub losses: EpochLosses,
    pub validation: Metrics,
    pub test: Option<Metrics>,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub final_test: Option<Metrics>,
    pub selected_test: Option<Metrics>,
    pub final_params: ParamSet<f32>,
    pub selected_params: ParamSet<f32>,
}

impl RunResult {
    pub fn final_validation(&self) -> &Metrics {
        &self.history.last().expect("runs have at least one epoch").validation
    }

    pub fn selected_validation(&self) -> &Metrics {
        &self.history[self.selected_epoch].validation
    }
}

/// Epoch with the highest validation F1; the earliest one wins ties.
pub fn select_model(history: &[EpochRecord]) -> Result<usize> {
    select_by_f1(history.iter().map(|r| r.validation.f1))
}

pub fn select_by_f1(f1: impl IntoIterator<Item = f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in f1.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((i, f));
        }
    }
    best.map(|(i, _)| i).ok_or(AdaptError::EmptyHistory)
}

/// Predicted heatmaps for `records`, computed in parallel over fixed chunks.
pub fn predict(
    model: &LocalizationModel,
    params: &ParamSet<f32>,
    view: UnlabeledView<'_>,
    records: &[usize],
) -> Result<Vec<Vec<f32>>> {
    let cells = model.config.heatmap_len();
    let chunks: Vec<Vec<Vec<f32>>> = records
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let mut g = Graph::new();
            let [c, h, w] = model.config.feature_shape;
            let xs: Vec<_> = (0..model.config.arrays).map(|_| g.input(vec![chunk.len(), c, h, w])).collect();
            let nodes = model.build(&mut g, params, &xs)?;
            g.mark_output(nodes.heatmap);
            let inputs = unlabeled_batch::<f32>(view, chunk)?;
            let mut exec = Executor::new();
            let out = exec.forward(&g, params, inputs)?;
            Ok(out[0].data().chunks_exact(cells).map(<[f32]>::to_vec).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Keypoint extraction and matching of predicted heatmaps against truths.
pub fn score_heatmaps<T: Scalar>(
    heatmaps: &[Vec<T>],
    truths: &[&[Position]],
    config: &TrainingConfig,
) -> Result<Vec<MatchReport>> {
    if heatmaps.len() != truths.len() {
        return Err(AdaptError::DatasetMismatch(format!("{} heatmaps for {} truth sets", heatmaps.len(), truths.len())));
    }
    heatmaps
        .iter()
        .zip(truths)
        .map(|(values, truth)| {
            let map = Heatmap::from_values(config.grid, values.clone())
                .ok_or_else(|| AdaptError::DatasetMismatch(format!("heatmap of {} values", values.len())))?;
            let preds: Vec<Position> =
                extract_keypoints(&map, config.threshold).into_iter().map(|k| k.position).collect();
            Ok(match_keypoints(&preds, truth, config.match_radius))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub reports: Vec<MatchReport>,
}

/// Scores the localization model in `params` on every record of a labeled set.
pub fn evaluate(model: &LocalizationModel, params: &ParamSet<f32>, data: &Dataset, config: &TrainingConfig) -> Result<Evaluation> {
    if !data.is_labeled() {
        return Err(AdaptError::MissingLabels(data.name().to_string()));
    }
    let records: Vec<usize> = (0..data.len()).collect();
    let heatmaps = predict(model, params, data.unlabeled(), &records)?;
    let truths = records.iter().map(|&r| data.positions(r)).collect::<Result<Vec<_>>>()?;
    let reports = score_heatmaps(&heatmaps, &truths, config)?;
    Ok(Evaluation { metrics: metrics(&reports), reports })
}

fn labeled_sets<'a>(method: &MethodSpec, data: &Datasets<'a>) -> Result<Vec<&'a Dataset>> {
    let need = |d: Option<&'a Dataset>, what: &str| {
        let d = d.ok_or_else(|| AdaptError::DatasetMismatch(format!("{method} needs a {what} dataset")))?;
        if d.is_labeled() {
            Ok(d)
        } else {
            Err(AdaptError::MissingLabels(d.name().to_string()))
        }
    };
    Ok(match method.labeled {
        LabeledSource::Synthetic => vec![need(data.source, "source")?],
        LabeledSource::Randomized => vec![need(data.source_randomized, "randomized source")?],
        LabeledSource::Target => vec![need(data.target_train, "labeled target")?],
        LabeledSource::SyntheticAndTarget => {
            vec![need(data.source, "source")?, need(data.target_train, "labeled target")?]
        }
    })
}

/// Endless reshuffled pass over the target records.
struct TargetSampler<'a> {
    view: UnlabeledView<'a>,
    order: Vec<usize>,
    cursor: usize,
    rng: hlad_core::rng::Rng,
}

impl<'a> TargetSampler<'a> {
    fn new(view: UnlabeledView<'a>, seed: u64) -> Self {
        let order = (0..view.len()).collect();
        Self { view, order, cursor: usize::MAX, rng: stream_rng(seed, name_stream("target")) }
    }

    fn next(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.cursor >= self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            })
            .collect()
    }
}

#[derive(Default)]
struct LossSums {
    steps: usize,
    sums: [f64; 5],
    counts: [usize; 5],
}

impl LossSums {
    fn add(&mut self, r: &StepReport) {
        self.steps += 1;
        let vals = [
            r.l_m,
            r.l_d.get(&Level::Int).copied(),
            r.l_d.get(&Level::Out).copied(),
            r.l_a.get(&Level::Int).copied(),
            r.l_a.get(&Level::Out).copied(),
        ];
        for (i, v) in vals.into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    fn means(&self) -> EpochLosses {
        let m = |i: usize| (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64);
        EpochLosses { l_m: m(0), l_d_int: m(1), l_d_out: m(2), l_a_int: m(3), l_a_out: m(4) }
    }
}

/// Trains `method` for `config.epochs` epochs. An epoch is one shuffled pass
/// over the method's labeled records (all of them, for methods with two
/// labeled sets); adversarial steps pair each labeled batch with an equally
/// sized target batch read through the label-free view.
pub fn train_method(method: &MethodSpec, data: &Datasets<'_>, config: &TrainingConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    if !data.validation.is_labeled() {
        return Err(AdaptError::MissingLabels(data.validation.name().to_string()));
    }
    let sets = labeled_sets(method, data)?;
    let mut target = match (method.is_adversarial(), data.target_train) {
        (false, _) => None,
        (true, None) => return Err(AdaptError::DatasetMismatch(format!("{method} needs an unlabeled target dataset"))),
        (true, Some(t)) => {
            if t.is_labeled() {
                log::warn!("{method}: target set {} carries labels; they are ignored", t.name());
            }
            if t.is_empty() {
                return Err(AdaptError::DatasetMismatch(format!("target set {} is empty", t.name())));
            }
            Some(TargetSampler::new(t.unlabeled(), seed))
        }
    };

    let mut trainer = Trainer::<f32>::for_method(method, config, seed)?;
    let mut picks: Vec<(usize, usize)> =
        sets.iter().enumerate().flat_map(|(s, d)| (0..d.len()).map(move |r| (s, r))).collect();
    if picks.is_empty() {
        return Err(AdaptError::DatasetMismatch(format!("{method}: no labeled records")));
    }
    let mut shuffle = stream_rng(seed, name_stream("shuffle"));
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, ParamSet<f32>)> = None;

    for epoch in 0..config.epochs {
        picks.shuffle(&mut shuffle);
        let mut sums = LossSums::default();
        for chunk in picks.chunks(config.batch_size) {
            let source = labeled_batch::<f32>(&sets, chunk)?;
            let target_half = match target.as_mut() {
                Some(t) => Some(unlabeled_batch(t.view, &t.next(chunk.len()))?),
                None => None,
            };
            let report = trainer.method_step(method, &DomainBatch { source: Some(source), target: target_half })?;
            sums.add(&report);
        }
        let validation = evaluate(trainer.model(), trainer.params(), data.validation, config)?.metrics;
        let last = epoch + 1 == config.epochs;
        let test = match data.test {
            Some(t) if config.test_every_epoch || last => Some(evaluate(trainer.model(), trainer.params(), t, config)?.metrics),
            _ => None,
        };
        log::info!("{method} seed {seed} epoch {epoch}: l_m {:?} val f1 {:.4}", sums.means().l_m, validation.f1);
        if best.as_ref().is_none_or(|(f, _)| validation.f1 > *f) {
            best = Some((validation.f1, trainer.params().clone()));
        }
        history.push(EpochRecord { epoch, steps: sums.steps, losses: sums.means(), validation, test });
    }

    let selected_epoch = select_model(&history)?;
    let selected_params = best.expect("at least one epoch").1;
    let final_test = history.last().and_then(|r| r.test);
    let selected_test = match (data.test, &history[selected_epoch].test) {
        (_, Some(m)) => Some(*m),
        (Some(t), None) => Some(evaluate(trainer.model(), &selected_params, t, config)?.metrics),
        (None, None) => None,
    };
    Ok(RunResult {
        method: method.id.to_string(),
        seed,
        history,
        selected_epoch,
        final_test,
        selected_test,
        final_params: trainer.params().clone(),
        selected_params,
    })
}
