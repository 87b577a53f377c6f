//! Localization model, domain discriminators and the adversarial training
//! steps that adapt synthetic-trained models to an unlabeled target domain.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod method;
pub mod model;
pub mod train;
pub mod trainer;

pub use config::TrainingConfig;
pub use data::{labeled_batch, unlabeled_batch, Dataset, DomainBatch, LabeledBatch, UnlabeledView};
pub use error::{AdaptError, Result};
pub use experiment::{run_experiment, EpochCurvePoint, ExperimentReport, MeanStd, MethodSummary, MetricSummary, RunSummary};
pub use method::{AdversarialMode, LabeledSource, MethodSpec, METHOD_IDS};
pub use model::{Discriminator, Level, LocalizationModel, ModelConfig, ModelNodes};
pub use train::{evaluate, predict, score_heatmaps, select_by_f1, select_model, train_method, Datasets, EpochLosses, EpochRecord, Evaluation, RunResult};
pub use trainer::{GradientProbe, ModelOutputs, Objective, StepReport, Trainer};

pub type Trainer32 = Trainer<f32>;
pub type Trainer64 = Trainer<f64>;
