//! Experiment manifests.
//!
//! ```json
//! {
//!   "methods": ["S", "GRintGRout"],
//!   "seeds": [0, 1, 2],
//!   "datasets": {"source": "train_s.ssld", "target_train": "train_r.ssld",
//!                "validation": "valid_r.ssld", "test": "test_r.ssld"},
//!   "output": "runs/desk",
//!   "config": {"epochs": 30}
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `seeds`, when
//! present, replaces `config.seeds`.

use std::path::{Path, PathBuf};

use hlad_adapt::{LabeledSource, MethodSpec, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, PipelineError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodName(pub MethodSpec);

impl TryFrom<String> for MethodName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse().map(MethodName).map_err(|_| format!("unknown method {s:?}; expected one of {:?}", hlad_adapt::METHOD_IDS))
    }
}

impl From<MethodName> for String {
    fn from(m: MethodName) -> Self {
        m.0.id.to_string()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub source: Option<PathBuf>,
    pub source_randomized: Option<PathBuf>,
    pub target_train: Option<PathBuf>,
    pub validation: PathBuf,
    pub test: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub datasets: DatasetPaths,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub config: TrainingConfig,
}

/// 1-based line and column of the first `needle` at or after `after`.
fn locate(text: &str, needle: &str, after: Option<&str>) -> (usize, usize) {
    let start = after.and_then(|a| text.find(a)).unwrap_or(0);
    let at = text[start..].find(needle).map_or(0, |i| start + i);
    let line = text[..at].matches('\n').count() + 1;
    let column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl Manifest {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let fail = |line, column, message: String| PipelineError::Manifest { path: origin.to_string(), line, column, message };
        let mut m: Manifest = serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            // serde_json appends " at line L column C"; keep only the message
            let message = message.split(" at line ").next().unwrap_or(&message).to_string();
            fail(e.line(), e.column(), message)
        })?;
        if let Some(seeds) = m.seeds.take() {
            m.config.seeds = seeds;
        }
        let at = |needle: &str, after: Option<&str>, msg: String| {
            let (l, c) = locate(text, needle, after);
            fail(l, c, msg)
        };
        if m.methods.is_empty() {
            return Err(at("\"methods\"", None, "at least one method is required".into()));
        }
        if let Err(e) = m.config.validate() {
            let key = if m.config.seeds.is_empty() && text.contains("\"seeds\"") { "\"seeds\"" } else { "\"config\"" };
            return Err(at(key, None, e.to_string()));
        }
        let d = &m.datasets;
        for MethodName(spec) in &m.methods {
            let needs: &[(&str, bool)] = match spec.labeled {
                LabeledSource::Synthetic => &[("source", d.source.is_some())],
                LabeledSource::Randomized => &[("source_randomized", d.source_randomized.is_some())],
                LabeledSource::Target => &[("target_train", d.target_train.is_some())],
                LabeledSource::SyntheticAndTarget => {
                    &[("source", d.source.is_some()), ("target_train", d.target_train.is_some())]
                }
            };
            let adversarial = [("target_train", !spec.is_adversarial() || d.target_train.is_some())];
            for (name, present) in needs.iter().chain(&adversarial) {
                if !present {
                    let quoted = format!("\"{}\"", spec.id);
                    return Err(at(&quoted, Some("\"methods\""), format!("method {} needs datasets.{name}", spec.id)));
                }
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut m = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        Ok((m, text))
    }

    /// Makes every relative path absolute against `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.datasets;
        for p in [&mut d.source, &mut d.source_randomized, &mut d.target_train, &mut d.test].into_iter().flatten() {
            fix(p);
        }
        fix(&mut d.validation);
        if let Some(o) = self.output.as_mut() {
            fix(o);
        }
    }

    pub fn specs(&self) -> Vec<MethodSpec> {
        self.methods.iter().map(|m| m.0.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "methods": ["S", "GRint"],
  "seeds": [4],
  "datasets": {"source": "a.ssld", "target_train": "b.ssld", "validation": "c.ssld"},
  "config": {"epochs": 2}
}"#;

    #[test]
    fn parses_and_overrides_seeds() {
        let m = Manifest::parse(GOOD, "m.json").unwrap();
        assert_eq!(m.config.seeds, vec![4]);
        assert_eq!(m.config.epochs, 2);
        assert_eq!(m.specs()[1].id, "GRint");
    }

    fn error_at(text: &str) -> (usize, usize, String) {
        match Manifest::parse(text, "m.json") {
            Err(PipelineError::Manifest { line, column, message, .. }) => (line, column, message),
            other => panic!("expected a manifest error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let (line, _, msg) = error_at(&GOOD.replace("\"GRint\"", "\"GRmid\""));
        assert_eq!(line, 2);
        assert!(msg.contains("GRmid"), "{msg}");

        let (line, _, msg) = error_at(&GOOD.replace("\"epochs\": 2", "\"epochz\": 2"));
        assert_eq!(line, 5);
        assert!(msg.contains("epochz"), "{msg}");

        let (line, col, msg) = error_at(&GOOD.replace(", \"target_train\": \"b.ssld\"", ""));
        assert_eq!((line, col), (2, 20));
        assert!(msg.contains("target_train"), "{msg}");

        let (line, _, _) = error_at(&GOOD.replace("\"epochs\": 2", "\"epochs\": 0"));
        assert_eq!(line, 5);

        let (line, _, _) = error_at("{\n  \"methods\": [\"S\"],\n  oops\n}");
        assert_eq!(line, 3);
    }

    #[test]
    fn relative_paths_resolve_against_the_manifest() {
        let mut m = Manifest::parse(GOOD, "m.json").unwrap();
        m.resolve(Path::new("/data/exp"));
        assert_eq!(m.datasets.validation, PathBuf::from("/data/exp/c.ssld"));
        assert!(m.datasets.test.is_none());
    }
}
