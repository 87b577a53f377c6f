//! Norms of the localization and adversarial θ_m gradients on simulator
//! batches, as supervised training proceeds. Shows why desk-scale runs need a
//! small `adv_weight`.

use hlad_adapt::*;
use hlad_pipeline::{generate, GenConfig};
use hlad_sim::Domain;

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
}

fn main() {
    let gen = GenConfig::default();
    let s = generate(&gen, Domain::Source, 1, 640, true).unwrap().into_training_dataset("s").unwrap();
    let t = generate(&gen, Domain::TargetEmulated, 2, 640, true).unwrap().into_training_dataset("t").unwrap();
    let cfg = TrainingConfig { lr: 1e-3, ..TrainingConfig::default() };
    let mut tr = Trainer32::new(&[Level::Int, Level::Out], &cfg, 0).unwrap();
    let ids = tr.model_params().to_vec();
    for round in 0..6 {
        let recs: Vec<usize> = (0..64).map(|i| (round * 64 + i) % 640).collect();
        let picks: Vec<(usize, usize)> = recs.iter().map(|&r| (0, r)).collect();
        let b = DomainBatch {
            source: Some(labeled_batch(&[&s], &picks).unwrap()),
            target: Some(unlabeled_batch(t.unlabeled(), &recs).unwrap()),
        };
        let mut g = |sup: bool, levels: Vec<Level>| {
            norm(&tr.probe_model_gradient(&b, AdversarialMode::Grl, &Objective { supervised: sup, levels }).unwrap().grads.flatten(&ids))
        };
        let (m, i, o) = (g(true, vec![]), g(false, vec![Level::Int]), g(false, vec![Level::Out]));
        println!("after {:>3} supervised steps: |g_m| {m:.3e} |g_int| {i:.3e} |g_out| {o:.3e}  ratios {:.1} {:.1}", round * 50, i / m, o / m);
        for k in 0..50 {
            let p: Vec<(usize, usize)> = (0..64).map(|i| (0, (k * 64 + i) % 640)).collect();
            tr.supervised_step(&labeled_batch(&[&s], &p).unwrap()).unwrap();
        }
    }
}
