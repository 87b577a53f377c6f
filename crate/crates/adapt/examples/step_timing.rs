use std::time::Instant;

use hlad_adapt::*;
use hlad_core::Tensor;

fn main() {
    let batch: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let cfg = TrainingConfig::default();
    let x = || Tensor::full(vec![batch, 8, 257, 9], 0.3f32);
    let source = LabeledBatch { arrays: vec![x(), x()], heatmaps: Tensor::full(vec![batch, 1, 24, 24], 0.1f32) };
    let batch_dt = DomainBatch { source: Some(source.clone()), target: Some(vec![x(), x()]) };
    for id in ["S", "GRint", "GRout", "LFint", "LFout", "GRintGRout", "LFintLFout"] {
        let m: MethodSpec = id.parse().unwrap();
        let mut t = Trainer32::for_method(&m, &cfg, 0).unwrap();
        t.method_step(&m, &batch_dt).unwrap();
        let reps = 3;
        let s = Instant::now();
        for _ in 0..reps {
            t.method_step(&m, &batch_dt).unwrap();
        }
        println!("{id}: {:.0} ms/step", s.elapsed().as_secs_f64() * 1e3 / reps as f64);
    }
}
