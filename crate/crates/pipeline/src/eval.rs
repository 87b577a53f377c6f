//! The `eval` command: scores a checkpoint on a dataset.

use std::path::Path;

use hlad_adapt::{evaluate, LocalizationModel, ModelConfig, TrainingConfig};
use hlad_core::{checkpoint, GradError, ParamSet};
use hlad_metrics::{match_keypoints, metrics, MatchReport, Metrics};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetFile, DatasetHeader};
use crate::error::{IoContext, PipelineError, Result};

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub threshold: f64,
    pub match_radius: f64,
    /// Model sizes; defaults derived from the dataset header otherwise.
    pub model: Option<ModelConfig>,
    /// Score the dataset's own positions as predictions instead of running a
    /// model. An oracle for the evaluation path itself.
    pub replay_labels: bool,
    pub details: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self { threshold: t.threshold, match_radius: t.match_radius, model: None, replay_labels: false, details: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: usize,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<Vec<MatchReport>>,
}

pub fn header_model(h: &DatasetHeader) -> ModelConfig {
    ModelConfig {
        feature_shape: h.feature_shape_usize(),
        arrays: h.arrays as usize,
        grid: h.grid.rows,
        ..ModelConfig::default()
    }
}

fn check_shapes(model: &ModelConfig, h: &DatasetHeader) -> Result<()> {
    let want = (h.feature_shape_usize(), h.arrays as usize, h.grid.rows, h.grid.cols);
    let have = (model.feature_shape, model.arrays, model.grid, model.grid);
    if want != have {
        return Err(PipelineError::Shape(format!(
            "model expects features {:?} x{} and a {}x{} grid; dataset has {:?} x{} and {}x{}",
            have.0, have.1, have.2, have.3, want.0, want.1, want.2, want.3
        )));
    }
    Ok(())
}

fn as_shape(e: GradError) -> PipelineError {
    match e {
        GradError::ShapeMismatch { .. } | GradError::UnknownParam(_) | GradError::DataLength { .. } => {
            PipelineError::Shape(format!("checkpoint does not fit the model: {e}"))
        }
        other => other.into(),
    }
}

/// Model parameters restored from a θ_m checkpoint.
pub fn load_model(model: ModelConfig, ckpt: &Path) -> Result<(LocalizationModel, ParamSet<f32>)> {
    let mut params = ParamSet::new(0);
    let m = LocalizationModel::register(&mut params, model)?;
    if !ckpt.exists() {
        return Err(std::io::Error::from(std::io::ErrorKind::NotFound)).at(ckpt);
    }
    checkpoint::load_into(&mut params, ckpt).map_err(as_shape)?;
    Ok((m, params))
}

pub fn cmd_eval(ckpt: Option<&Path>, dataset: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let file = DatasetFile::load(dataset)?;
    let header = file.header.clone();
    let data = file.into_evaluation_dataset("eval")?;
    let config = TrainingConfig {
        threshold: opts.threshold,
        match_radius: opts.match_radius,
        grid: header.grid,
        ..TrainingConfig::default()
    };
    let reports = if opts.replay_labels {
        (0..data.len())
            .map(|r| Ok(match_keypoints(data.positions(r)?, data.positions(r)?, opts.match_radius)))
            .collect::<Result<Vec<_>>>()?
    } else {
        let ckpt = ckpt.ok_or_else(|| PipelineError::Shape("a checkpoint is required unless labels are replayed".into()))?;
        let model_config = opts.model.unwrap_or_else(|| header_model(&header));
        check_shapes(&model_config, &header)?;
        let (model, params) = load_model(model_config, ckpt)?;
        evaluate(&model, &params, &data, &config)?.reports
    };
    Ok(EvalReport { records: data.len(), metrics: metrics(&reports), samples: opts.details.then_some(reports) })
}
