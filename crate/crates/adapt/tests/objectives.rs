mod common;

use common::*;
use hlad_adapt::*;

const LEVEL_SETS: [&[Level]; 3] = [&[Level::Int], &[Level::Out], &[Level::Int, Level::Out]];

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b))
}

fn trainer64(levels: &[Level], seed: u64) -> Trainer64 {
    Trainer::new(levels, &small_config(), seed).unwrap()
}

#[test]
fn supervised_loss_decreases_on_a_fixed_batch() {
    let mut t = Trainer32::new(&[], &small_config(), 3).unwrap();
    let batch = labeled::<f32>(8, 1);
    let mut prev = f64::INFINITY;
    for step in 0..50 {
        let l = t.supervised_step(&batch).unwrap().l_m.unwrap();
        assert!(l < prev, "step {step}: {l} >= {prev}");
        prev = l;
    }
}

#[test]
fn perfect_output_gives_zero_loss_and_no_update() {
    let mut t = trainer64(&[], 5);
    let mut batch = labeled::<f64>(4, 2);
    let probe = DomainBatch { source: Some(batch.clone()), target: None };
    // labels equal to the model's own prediction
    let pred = t.model_outputs(&probe).unwrap().heatmap;
    batch.heatmaps = pred;
    let before = t.params().clone();
    let r = t.supervised_step(&batch).unwrap();
    assert_eq!(r.l_m, Some(0.0));
    for &id in t.model_params() {
        assert_eq!(t.params().get(id), before.get(id));
    }
}

#[test]
fn same_seed_gives_bitwise_equal_parameters() {
    let run = || {
        let mut t = Trainer32::new(&[Level::Int, Level::Out], &small_config(), 9).unwrap();
        for s in 0..3 {
            t.lf_adversarial_step(&domain_batch(4, 4, s), &[Level::Int, Level::Out]).unwrap();
            t.grl_adversarial_step(&domain_batch(4, 4, s + 10), &[Level::Out]).unwrap();
        }
        t.params().fingerprint(&t.params().ids().collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn discriminator_pass_counts() {
    for levels in LEVEL_SETS {
        let mut t = Trainer32::new(levels, &small_config(), 1).unwrap();
        let b = domain_batch(3, 3, 0);
        let grl = t.grl_adversarial_step(&b, levels).unwrap();
        let lf = t.lf_adversarial_step(&b, levels).unwrap();
        for l in levels {
            assert_eq!(grl.d_passes[l], 1, "{levels:?}");
            assert_eq!(lf.d_passes[l], 2, "{levels:?}");
        }
        assert_eq!(grl.d_passes.len(), levels.len());
    }
}

#[test]
fn label_flip_second_pass_leaves_discriminators_alone() {
    for levels in LEVEL_SETS {
        let b = domain_batch::<f32>(4, 4, 7);
        let mut lf = Trainer32::new(levels, &small_config(), 2).unwrap();
        let mut d_only = Trainer32::new(levels, &small_config(), 2).unwrap();
        let m0 = model_fingerprint(&d_only);
        lf.lf_adversarial_step(&b, levels).unwrap();
        d_only.discriminator_step(&b, levels).unwrap();
        for &l in levels {
            let ids = lf.discriminator_params(l).unwrap().to_vec();
            assert_eq!(lf.params().fingerprint(&ids), d_only.params().fingerprint(&ids), "{l:?}");
        }
        assert_eq!(model_fingerprint(&d_only), m0);
        assert_ne!(model_fingerprint(&lf), m0);
    }
}

#[test]
fn grl_and_lf_generator_gradients_are_collinear() {
    let objective = |l| Objective { supervised: false, levels: vec![l] };
    for level in [Level::Int, Level::Out] {
        for seed in 0..4 {
            for synthetic in [true, false] {
                let b = if synthetic { domain_batch::<f64>(1, 0, seed) } else { domain_batch::<f64>(0, 1, seed) };
                let mut t = trainer64(&[level], seed);
                let ids = t.model_params().to_vec();
                let grl = t.probe_model_gradient(&b, AdversarialMode::Grl, &objective(level)).unwrap();
                let lf = t.probe_model_gradient(&b, AdversarialMode::LabelFlip, &objective(level)).unwrap();
                let p = grl.d_outputs[&level][0];
                assert_eq!(p, lf.d_outputs[&level][0]);
                let (g, f) = (grl.grads.flatten(&ids), lf.grads.flatten(&ids));
                let expected = if synthetic { (1.0 - p) / p } else { p / (1.0 - p) };
                let cos = cosine(&g, &f);
                let ratio = norm(&g) / norm(&f);
                assert!((cos - 1.0).abs() < 1e-5, "{level:?} synthetic={synthetic}: cos {cos}");
                assert!((ratio - expected).abs() < 1e-5 * expected.max(1.0), "{level:?}: ratio {ratio} vs {expected}");
            }
        }
    }
}

#[test]
fn adv_weight_scales_the_generator_gradient_in_both_modes() {
    let b = domain_batch::<f64>(2, 2, 3);
    for mode in [AdversarialMode::Grl, AdversarialMode::LabelFlip] {
        for level in [Level::Int, Level::Out] {
            let obj = Objective { supervised: false, levels: vec![level] };
            let grad = |w: f64| {
                let cfg = TrainingConfig { adv_weight: w, ..small_config() };
                let mut t = Trainer64::new(&[level], &cfg, 6).unwrap();
                let ids = t.model_params().to_vec();
                t.probe_model_gradient(&b, mode, &obj).unwrap().grads.flatten(&ids)
            };
            let (full, quarter) = (grad(1.0), grad(0.25));
            for (f, q) in full.iter().zip(&quarter) {
                assert!((0.25 * f - q).abs() <= 1e-12 * f.abs().max(1.0), "{mode:?} {level:?}: {f} vs {q}");
            }
        }
    }
}

#[test]
fn ensemble_gradient_is_the_sum_of_its_parts() {
    let b = domain_batch::<f64>(3, 3, 4);
    for mode in [AdversarialMode::Grl, AdversarialMode::LabelFlip] {
        let mut t = trainer64(&[Level::Int, Level::Out], 8);
        let ids = t.model_params().to_vec();
        let mut grad = |supervised, levels: Vec<Level>| {
            t.probe_model_gradient(&b, mode, &Objective { supervised, levels }).unwrap().grads.flatten(&ids)
        };
        let total = grad(true, vec![Level::Int, Level::Out]);
        let parts = [grad(true, vec![]), grad(false, vec![Level::Int]), grad(false, vec![Level::Out])];
        let scale = norm(&total).max(1e-12);
        for (i, v) in total.iter().enumerate() {
            let sum: f64 = parts.iter().map(|p| p[i]).sum();
            assert!((v - sum).abs() <= 1e-6 * scale, "{mode:?} component {i}: {v} vs {sum}");
        }
    }
}

#[test]
fn disabling_the_output_discriminator_reduces_to_the_int_step() {
    let b = domain_batch::<f64>(3, 3, 1);
    for mode in [AdversarialMode::Grl, AdversarialMode::LabelFlip] {
        let obj = Objective { supervised: true, levels: vec![Level::Int] };
        let mut both = trainer64(&[Level::Int, Level::Out], 4);
        let mut int = trainer64(&[Level::Int], 4);
        let ids = int.model_params().to_vec();
        let g_both = both.probe_model_gradient(&b, mode, &obj).unwrap().grads.flatten(&ids);
        let g_int = int.probe_model_gradient(&b, mode, &obj).unwrap().grads.flatten(&ids);
        assert_eq!(g_both, g_int, "{mode:?}");
    }
    let mut both = trainer64(&[Level::Int, Level::Out], 4);
    let mut int = trainer64(&[Level::Int], 4);
    both.grl_adversarial_step(&b, &[Level::Int]).unwrap();
    int.grl_adversarial_step(&b, &[Level::Int]).unwrap();
    assert_eq!(model_fingerprint(&both), model_fingerprint(&int));
}

#[test]
fn discriminator_updates_are_independent() {
    let b = domain_batch::<f64>(3, 3, 6);
    for mode in [AdversarialMode::Grl, AdversarialMode::LabelFlip] {
        let mut both = trainer64(&[Level::Int, Level::Out], 2);
        both.ensemble_step(&b, mode).unwrap();
        for level in [Level::Int, Level::Out] {
            let mut single = trainer64(&[level], 2);
            single.method_step(&MethodSpec { id: "x", mode, levels: vec![level], labeled: LabeledSource::Synthetic }, &b).unwrap();
            // ids are positional, so each trainer uses its own
            let (ib, is) = (both.discriminator_params(level).unwrap(), single.discriminator_params(level).unwrap());
            assert_eq!(both.params().fingerprint(ib), single.params().fingerprint(is), "{mode:?} {level:?}");
        }
    }
}

#[test]
fn zero_lambda_step_matches_the_supervised_step() {
    let cfg = TrainingConfig { grl_lambda: 0.0, ..small_config() };
    let b = domain_batch::<f32>(4, 4, 3);
    for levels in LEVEL_SETS {
        let mut s = Trainer32::new(&[], &cfg, 5).unwrap();
        let mut g = Trainer32::new(levels, &cfg, 5).unwrap();
        for _ in 0..3 {
            s.supervised_step(b.source.as_ref().unwrap()).unwrap();
            g.grl_adversarial_step(&b, levels).unwrap();
        }
        assert_eq!(model_fingerprint(&s), model_fingerprint(&g), "{levels:?}");
    }
}

/// Full-size inputs from two domains with opposite feature offsets.
fn split_domains(n: usize, seed: u64) -> DomainBatch<f32> {
    let cfg = ModelConfig::default();
    let [c, h, w] = cfg.feature_shape;
    let mut rng = hlad_core::rng::stream_rng(seed, 21);
    let mut x = |offset: f32| -> Vec<hlad_core::Tensor<f32>> {
        (0..cfg.arrays)
            .map(|_| {
                let data = (0..n * c * h * w).map(|_| offset + rand::Rng::random_range(&mut rng, -1.0f32..1.0)).collect();
                hlad_core::Tensor::new(vec![n, c, h, w], data).unwrap()
            })
            .collect()
    };
    let heat = hlad_core::Tensor::zeros(vec![n, 1, cfg.grid, cfg.grid]);
    DomainBatch { source: Some(LabeledBatch { arrays: x(1.0), heatmaps: heat }), target: Some(x(-1.0)) }
}

#[test]
fn discriminators_separate_distinct_domains_on_a_frozen_model() {
    for level in [Level::Int, Level::Out] {
        let mut t = Trainer32::new(&[level], &TrainingConfig::default(), 0).unwrap();
        let m0 = model_fingerprint(&t);
        let mut losses = Vec::new();
        let mut accuracy = 0.0;
        for step in 0..200 {
            let b = split_domains(8, step);
            losses.push(t.discriminator_step(&b, &[level]).unwrap().l_d[&level]);
            if step % 10 == 9 {
                let eval = split_domains(32, 10_000 + step);
                let p = t.discriminator_outputs(&eval, level).unwrap();
                let correct = p.iter().enumerate().filter(|&(i, &v)| (v > 0.5) == (i < 32)).count();
                accuracy = correct as f64 / p.len() as f64;
                if accuracy > 0.9 {
                    break;
                }
            }
        }
        println!("{level:?}: accuracy {accuracy} after {} steps", losses.len());
        assert!(accuracy > 0.9, "{level:?}: accuracy {accuracy}");
        assert!(losses.last().unwrap() < &losses[0], "{level:?}: {losses:?}");
        assert_eq!(model_fingerprint(&t), m0);
    }
}

#[test]
fn unconfigured_levels_are_rejected() {
    let mut t = Trainer32::new(&[Level::Int], &small_config(), 0).unwrap();
    let b = domain_batch::<f32>(2, 2, 0);
    assert!(matches!(t.grl_adversarial_step(&b, &[Level::Out]), Err(AdaptError::LevelNotConfigured(Level::Out))));
    assert!(matches!(t.ensemble_step(&b, AdversarialMode::LabelFlip), Err(AdaptError::LevelNotConfigured(Level::Out))));
}

#[test]
fn shared_encoder_weights() {
    let mut t = trainer64(&[], 1);
    let x = features::<f64>(2, 0.0, 4);
    let same = DomainBatch { source: None, target: Some(vec![x[0].clone(), x[0].clone()]) };
    let swapped = DomainBatch { source: None, target: Some(vec![x[1].clone(), x[0].clone()]) };
    let straight = DomainBatch { source: None, target: Some(vec![x[0].clone(), x[1].clone()]) };
    let lat = |t: &mut Trainer64, b: &DomainBatch<f64>| t.model_outputs(b).unwrap().latent;
    let l = small_model().latent;
    let same = lat(&mut t, &same);
    for row in same.data().chunks(2 * l) {
        assert_eq!(row[..l], row[l..]);
    }
    let (a, b) = (lat(&mut t, &straight), lat(&mut t, &swapped));
    for (ra, rb) in a.data().chunks(2 * l).zip(b.data().chunks(2 * l)) {
        assert_eq!(ra[..l], rb[l..]);
        assert_eq!(ra[l..], rb[..l]);
    }
}
