mod common;

use common::*;
use hlad_adapt::*;

struct Fixture {
    source: Dataset,
    randomized: Dataset,
    target: Dataset,
    validation: Dataset,
    test: Dataset,
}

impl Fixture {
    fn new(n: usize) -> Self {
        Self {
            source: dataset("source", n, true, 0.3, 1),
            randomized: dataset("randomized", n, true, 0.1, 2),
            target: dataset("target", n, true, -0.3, 3),
            validation: dataset("validation", 24, true, -0.3, 4),
            test: dataset("test", 24, true, -0.3, 5),
        }
    }

    fn datasets(&self) -> Datasets<'_> {
        Datasets {
            source: Some(&self.source),
            source_randomized: Some(&self.randomized),
            target_train: Some(&self.target),
            validation: &self.validation,
            test: Some(&self.test),
        }
    }
}

fn method(id: &str) -> MethodSpec {
    id.parse().unwrap()
}

fn model_print(r: &RunResult) -> u64 {
    let ids = LocalizationModel::param_ids(&r.final_params);
    r.final_params.fingerprint(&ids)
}

#[test]
fn supervised_training_reduces_the_loss() {
    let f = Fixture::new(500);
    let cfg = TrainingConfig { epochs: 10, batch_size: 32, ..small_config() };
    let r = train_method(&method("S"), &f.datasets(), &cfg, 0).unwrap();
    let losses: Vec<f64> = r.history.iter().map(|h| h.losses.l_m.unwrap()).collect();
    assert_eq!(losses.len(), 10);
    assert!(losses[9] < losses[0], "{losses:?}");
    assert_eq!(r.history[0].steps, 16);
}

#[test]
fn labeled_set_usage_per_method() {
    let cfg = small_config();
    let f = Fixture::new(20);
    train_method(&method("R&S"), &f.datasets(), &cfg, 0).unwrap();
    assert_eq!(f.source.label_reads(), cfg.epochs * 20);
    assert_eq!(f.target.label_reads(), cfg.epochs * 20);
    assert_eq!(f.randomized.label_reads(), 0);

    let f = Fixture::new(20);
    let r = train_method(&method("S+"), &f.datasets(), &cfg, 0).unwrap();
    assert_eq!(f.randomized.label_reads(), cfg.epochs * 20);
    assert_eq!(f.source.label_reads(), 0);
    assert_eq!(r.history[0].steps, 3);
}

#[test]
fn adversarial_methods_never_read_target_labels() {
    let cfg = small_config();
    for id in ["GRint", "LFint", "GRout", "LFout", "GRintGRout", "LFintLFout", "GRintGRout+", "LFintLFout+"] {
        let f = Fixture::new(16);
        let r = train_method(&method(id), &f.datasets(), &cfg, 1).unwrap();
        assert_eq!(f.target.label_reads(), 0, "{id}");
        assert!(r.history[0].losses.l_m.is_some());
    }
    let f = Fixture::new(16);
    train_method(&method("R"), &f.datasets(), &cfg, 1).unwrap();
    assert!(f.target.label_reads() > 0);
}

#[test]
fn zero_lambda_runs_match_method_s() {
    let cfg = TrainingConfig { grl_lambda: 0.0, ..small_config() };
    let f = Fixture::new(20);
    let s = train_method(&method("S"), &f.datasets(), &cfg, 3).unwrap();
    for id in ["GRint", "GRout", "GRintGRout"] {
        let g = train_method(&method(id), &f.datasets(), &cfg, 3).unwrap();
        assert_eq!(model_print(&g), model_print(&s), "{id}");
        let val = |r: &RunResult| r.history.iter().map(|h| h.validation).collect::<Vec<_>>();
        assert_eq!(val(&g), val(&s), "{id}");
    }
}

#[test]
fn runs_are_deterministic_and_selection_dominates() {
    let cfg = TrainingConfig { epochs: 3, ..small_config() };
    let f = Fixture::new(24);
    for id in ["S", "LFintLFout"] {
        let a = train_method(&method(id), &f.datasets(), &cfg, 7).unwrap();
        let b = train_method(&method(id), &f.datasets(), &cfg, 7).unwrap();
        assert_eq!(model_print(&a), model_print(&b));
        assert_eq!(a.history, b.history);
        assert!(a.selected_validation().f1 >= a.final_validation().f1);
        assert_eq!(a.selected_epoch, select_model(&a.history).unwrap());
    }
}

#[test]
fn deferred_test_scoring_matches_per_epoch_scoring() {
    let f = Fixture::new(24);
    let every = TrainingConfig { epochs: 3, ..small_config() };
    let deferred = TrainingConfig { test_every_epoch: false, ..every.clone() };
    let a = train_method(&method("GRout"), &f.datasets(), &every, 2).unwrap();
    let b = train_method(&method("GRout"), &f.datasets(), &deferred, 2).unwrap();
    assert_eq!(a.final_test, b.final_test);
    assert_eq!(a.selected_test, b.selected_test);
    assert!(b.history[..2].iter().all(|h| h.test.is_none()));
}

#[test]
fn dataset_requirements_are_checked() {
    let cfg = small_config();
    let f = Fixture::new(8);
    let unlabeled = dataset("target", 8, false, 0.0, 9);
    let no_target = Datasets { target_train: None, ..f.datasets() };
    assert!(matches!(train_method(&method("GRint"), &no_target, &cfg, 0), Err(AdaptError::DatasetMismatch(_))));
    let blind = Datasets { target_train: Some(&unlabeled), ..f.datasets() };
    assert!(matches!(train_method(&method("R"), &blind, &cfg, 0), Err(AdaptError::MissingLabels(_))));
    assert!(train_method(&method("LFout"), &blind, &cfg, 0).is_ok());
    let bad_val = Datasets { validation: &unlabeled, ..f.datasets() };
    assert!(matches!(train_method(&method("S"), &bad_val, &cfg, 0), Err(AdaptError::MissingLabels(_))));
}

#[test]
fn experiment_aggregates() {
    let f = Fixture::new(16);
    let methods = [method("S"), method("GRint")];
    let one = TrainingConfig { seeds: vec![4], ..small_config() };
    let (report, runs) = run_experiment(&methods, &f.datasets(), &one).unwrap();
    assert_eq!(runs.len(), 2);
    for m in &report.methods {
        assert_eq!(m.final_test.as_ref().unwrap().f1.std, 0.0);
        assert_eq!(m.curve.len(), one.epochs);
    }
    let ab = TrainingConfig { seeds: vec![1, 2], ..small_config() };
    let ba = TrainingConfig { seeds: vec![2, 1], ..small_config() };
    let (ra, _) = run_experiment(&methods, &f.datasets(), &ab).unwrap();
    let (rb, _) = run_experiment(&methods, &f.datasets(), &ba).unwrap();
    assert_eq!(ra.methods, rb.methods);
    let json = serde_json::to_value(&ra).unwrap();
    for key in ["final", "selected"] {
        let row = &json["methods"][0][key];
        for col in ["rmse", "precision", "recall", "f1"] {
            assert!(row.get(col).is_some(), "{key}.{col}");
        }
    }
}

#[test]
fn evaluation_matches_direct_scoring() {
    let f = Fixture::new(8);
    let cfg = small_config();
    let r = train_method(&method("S"), &f.datasets(), &cfg, 0).unwrap();
    let model = LocalizationModel::register(&mut hlad_core::ParamSet::<f32>::new(0), cfg.model).unwrap();
    let eval = evaluate(&model, &r.final_params, &f.validation, &cfg).unwrap();
    assert_eq!(eval.metrics, r.final_validation().clone());
    assert_eq!(eval.reports.len(), f.validation.len());
    // labels replayed as predictions score perfectly
    let truths: Vec<&[hlad_metrics::Position]> = (0..f.test.len()).map(|i| f.test.positions(i).unwrap()).collect();
    let maps: Vec<Vec<f32>> = (0..f.test.len()).map(|i| f.test.heatmap(i).unwrap().to_vec()).collect();
    let m = hlad_metrics::metrics(&score_heatmaps(&maps, &truths, &cfg).unwrap());
    assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
}
