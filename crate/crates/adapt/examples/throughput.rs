use std::time::Instant;

use hlad_adapt::model::*;
use hlad_core::{Executor, GradRequest, Graph, ParamSet, Seed, Tensor};

fn main() {
    let batch: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let cfg = ModelConfig::default();
    let mut p = ParamSet::<f32>::new(0);
    let m = LocalizationModel::register(&mut p, cfg).unwrap();
    let mut g = Graph::new();
    let xa = g.input(vec![batch, 8, 257, 9]);
    let xb = g.input(vec![batch, 8, 257, 9]);
    let y = g.input(vec![batch, 1, 24, 24]);
    let n = m.build(&mut g, &p, &[xa, xb]).unwrap();
    let loss = g.mse(n.heatmap, y).unwrap();
    g.mark_output(loss);
    let ids = LocalizationModel::param_ids(&p);
    let mut ex = Executor::new();
    let x = Tensor::full(vec![batch, 8, 257, 9], 0.3f32);
    let yt = Tensor::full(vec![batch, 1, 24, 24], 0.1f32);
    let reps = 5;
    let t = Instant::now();
    for _ in 0..reps {
        ex.forward(&g, &p, vec![x.clone(), x.clone(), yt.clone()]).unwrap();
    }
    let fwd = t.elapsed().as_secs_f64() / reps as f64;
    let t = Instant::now();
    for _ in 0..reps {
        ex.backward(&g, &p, &[Seed::scalar(loss, 1.0)], &GradRequest::params(ids.clone())).unwrap();
    }
    let bwd = t.elapsed().as_secs_f64() / reps as f64;
    println!("batch {batch}: forward {:.1} ms, backward {:.1} ms, per-sample {:.2} ms", fwd * 1e3, bwd * 1e3, (fwd + bwd) * 1e3 / batch as f64);
}
