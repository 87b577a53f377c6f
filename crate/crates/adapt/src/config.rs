use hlad_core::AdamConfig;
use hlad_metrics::{GridConfig, DETECTION_THRESHOLD, MATCH_RADIUS_M};
use serde::{Deserialize, Serialize};

use crate::error::{AdaptError, Result};
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// Size of each half-batch: labeled source and unlabeled target.
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    /// Reversal strength of the gradient-reversal node.
    pub grl_lambda: f64,
    /// Weight of the adversarial terms in the localization update: scales the
    /// flipped-label loss, and the reversed gradient on top of `grl_lambda`.
    /// Discriminator updates are unaffected.
    pub adv_weight: f64,
    pub threshold: f64,
    pub match_radius: f64,
    /// Score the test split after every epoch rather than only at the final
    /// and selected epochs.
    pub test_every_epoch: bool,
    pub model: ModelConfig,
    pub grid: GridConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            seeds: vec![0, 1, 2],
            grl_lambda: 1.0,
            adv_weight: 1.0,
            threshold: DETECTION_THRESHOLD,
            match_radius: MATCH_RADIUS_M,
            test_every_epoch: true,
            model: ModelConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AdaptError::Config(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.lr > 0.0 && self.epsilon > 0.0) {
            return bad("lr and epsilon must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.grl_lambda >= 0.0 && self.adv_weight >= 0.0) {
            return bad("grl_lambda and adv_weight must be non-negative");
        }
        if self.grid.rows != self.model.grid || self.grid.cols != self.model.grid || !self.model.grid.is_multiple_of(4) {
            return bad("heatmap grid must be square, match the model and be a multiple of 4");
        }
        Ok(())
    }
}
