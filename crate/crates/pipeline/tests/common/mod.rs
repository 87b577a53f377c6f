#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hlad_pipeline::{generate, GenConfig};
use hlad_sim::Domain;

pub fn write_set(dir: &Path, name: &str, domain: Domain, seed: u64, count: usize, labeled: bool) -> PathBuf {
    let path = dir.join(format!("{name}.ssld"));
    generate(&GenConfig::default(), domain, seed, count, labeled).unwrap().save(&path).unwrap();
    path
}

/// Source, unlabeled target, labeled validation and test sets.
pub struct Sets {
    pub source: PathBuf,
    pub target: PathBuf,
    pub target_labeled: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
}

pub fn sets(dir: &Path, n: usize) -> Sets {
    Sets {
        source: write_set(dir, "source", Domain::Source, 1, n, true),
        target: write_set(dir, "target", Domain::TargetEmulated, 2, n, false),
        target_labeled: write_set(dir, "target_labeled", Domain::TargetEmulated, 2, n, true),
        validation: write_set(dir, "validation", Domain::TargetEmulated, 3, n / 4, true),
        test: write_set(dir, "test", Domain::TargetEmulated, 4, n / 4, false),
    }
}

pub fn manifest(dir: &Path, file: &str, methods: &[&str], target: &Path, sets: &Sets, epochs: usize) -> PathBuf {
    let m = serde_json::json!({
        "methods": methods,
        "seeds": [0],
        "datasets": {
            "source": sets.source,
            "target_train": target,
            "validation": sets.validation,
            "test": sets.test,
        },
        "config": {"epochs": epochs, "lr": 1e-3},
    });
    let path = dir.join(file);
    std::fs::write(&path, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    path
}
