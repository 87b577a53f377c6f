#![allow(dead_code)]

use hlad_adapt::*;
use hlad_core::rng::stream_rng;
use hlad_core::{Scalar, Tensor};
use hlad_metrics::{GridConfig, Position};
use rand::Rng;

pub fn small_model() -> ModelConfig {
    ModelConfig { feature_shape: [4, 9, 5], arrays: 2, conv_channels: [4, 4, 4], latent: 8, grid: 8, decoder_channels: 4 }
}

pub fn small_grid() -> GridConfig {
    GridConfig { rows: 8, cols: 8, cell_size: 0.75, ..GridConfig::default() }
}

pub fn small_config() -> TrainingConfig {
    TrainingConfig { model: small_model(), grid: small_grid(), batch_size: 8, epochs: 2, ..TrainingConfig::default() }
}

pub fn features<T: Scalar>(n: usize, offset: f64, seed: u64) -> Vec<Tensor<T>> {
    let cfg = small_model();
    let mut rng = stream_rng(seed, 11);
    (0..cfg.arrays)
        .map(|_| {
            let [c, h, w] = cfg.feature_shape;
            let data: Vec<f64> = (0..n * c * h * w).map(|_| offset + rng.random_range(-1.0..1.0)).collect();
            Tensor::from_f64(vec![n, c, h, w], &data).unwrap()
        })
        .collect()
}

pub fn heatmaps<T: Scalar>(n: usize, seed: u64) -> Tensor<T> {
    let mut rng = stream_rng(seed, 12);
    let g = small_model().grid;
    let data: Vec<f64> = (0..n * g * g).map(|_| rng.random_range(0.0..1.0)).collect();
    Tensor::from_f64(vec![n, 1, g, g], &data).unwrap()
}

pub fn labeled<T: Scalar>(n: usize, seed: u64) -> LabeledBatch<T> {
    LabeledBatch { arrays: features(n, 0.0, seed), heatmaps: heatmaps(n, seed) }
}

pub fn domain_batch<T: Scalar>(n_source: usize, n_target: usize, seed: u64) -> DomainBatch<T> {
    DomainBatch {
        source: (n_source > 0).then(|| LabeledBatch { arrays: features(n_source, 0.5, seed), heatmaps: heatmaps(n_source, seed) }),
        target: (n_target > 0).then(|| features(n_target, -0.5, seed + 1000)),
    }
}

/// Dataset whose features loosely encode the first source position, so
/// models can learn something within a few epochs.
pub fn dataset(name: &str, n: usize, labeled: bool, offset: f32, seed: u64) -> Dataset {
    let cfg = small_model();
    let mut rng = stream_rng(seed, 13);
    let per_array = cfg.feature_len();
    let mut feats = Vec::with_capacity(n * cfg.arrays * per_array);
    let mut positions: Vec<Vec<Position>> = Vec::with_capacity(n);
    for _ in 0..n {
        let p: Position = [rng.random_range(0.5..5.5), rng.random_range(0.5..5.5)];
        for a in 0..cfg.arrays {
            for i in 0..per_array {
                let signal = ((i % 7) as f64 * p[a % 2]).sin() as f32;
                feats.push(signal + offset + rng.random_range(-0.2f32..0.2));
            }
        }
        positions.push(vec![p]);
    }
    Dataset::new(name, cfg.feature_shape, cfg.arrays, feats, labeled.then_some(positions), small_grid()).unwrap()
}

pub fn model_fingerprint<T: Scalar>(t: &Trainer<T>) -> u64 {
    t.params().fingerprint(t.model_params())
}
