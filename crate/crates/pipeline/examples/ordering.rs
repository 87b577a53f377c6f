//! Small-scale check of the method ordering on simulated domains.
//! Usage: ordering [records per domain] [epochs] [seeds] [methods,...] [lr] [adv weight]

use std::time::Instant;

use hlad_adapt::*;
use hlad_pipeline::{generate, GenConfig};
use hlad_sim::Domain;

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let methods: Vec<MethodSpec> = args
        .get(4)
        .map_or("S,R,GRint,GRout,GRintGRout", String::as_str)
        .split(',')
        .map(|m| m.parse().unwrap())
        .collect();
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let adv_weight: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let gen = GenConfig::default();
    let t = Instant::now();
    let eval_n = (n / 10).max(100);
    let source = generate(&gen, Domain::Source, 1, n, true).unwrap().into_training_dataset("source").unwrap();
    let target = generate(&gen, Domain::TargetEmulated, 2, n, true).unwrap().into_training_dataset("target").unwrap();
    let val = generate(&gen, Domain::TargetEmulated, 3, eval_n, true).unwrap().into_training_dataset("val").unwrap();
    let test = generate(&gen, Domain::TargetEmulated, 4, eval_n, true).unwrap().into_training_dataset("test").unwrap();
    let randomized = if methods.iter().any(|m| m.labeled == LabeledSource::Randomized) {
        Some(generate(&gen, Domain::SourceRandomized, 5, n, true).unwrap().into_training_dataset("rand").unwrap())
    } else {
        None
    };
    println!("generated in {:.1}s", t.elapsed().as_secs_f64());
    let data = Datasets {
        source: Some(&source),
        source_randomized: randomized.as_ref(),
        target_train: Some(&target),
        validation: &val,
        test: Some(&test),
    };
    let cfg = TrainingConfig { epochs, seeds: (0..seeds).collect(), test_every_epoch: false, lr, adv_weight, ..TrainingConfig::default() };
    for m in &methods {
        let t = Instant::now();
        let (report, _) = run_experiment(std::slice::from_ref(m), &data, &cfg).unwrap();
        let s = &report.methods[0];
        let f = s.final_test.as_ref().unwrap();
        let sel = s.selected_test.as_ref().unwrap();
        let curve: Vec<String> = s.curve.iter().map(|c| format!("{:.3}", c.validation_f1.mean)).collect();
        println!(
            "{:<12} final f1 {:.3}±{:.3} (P {:.3} R {:.3})  selected f1 {:.3}  {:.0}s  val curve {}",
            m.id,
            f.f1.mean,
            f.f1.std,
            f.precision.mean,
            f.recall.mean,
            sel.f1.mean,
            t.elapsed().as_secs_f64(),
            curve.join(" ")
        );
    }
}
