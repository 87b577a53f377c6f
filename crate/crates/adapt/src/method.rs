use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AdaptError;
use crate::model::Level;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    None,
    Grl,
    LabelFlip,
}

/// Which labeled data a method trains its localization loss on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabeledSource {
    Synthetic,
    Randomized,
    Target,
    SyntheticAndTarget,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub id: &'static str,
    pub mode: AdversarialMode,
    pub levels: Vec<Level>,
    pub labeled: LabeledSource,
}

/// Every method of the comparison, in table order.
pub const METHOD_IDS: [&str; 12] =
    ["S", "R", "R&S", "S+", "GRint", "LFint", "GRout", "LFout", "GRintGRout", "LFintLFout", "GRintGRout+", "LFintLFout+"];

impl MethodSpec {
    pub fn uses_target_labels(&self) -> bool {
        matches!(self.labeled, LabeledSource::Target | LabeledSource::SyntheticAndTarget)
    }

    pub fn is_adversarial(&self) -> bool {
        self.mode != AdversarialMode::None
    }

    pub fn all() -> Vec<MethodSpec> {
        METHOD_IDS.iter().map(|id| id.parse().expect("table ids parse")).collect()
    }
}

impl FromStr for MethodSpec {
    type Err = AdaptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use AdversarialMode::*;
        use LabeledSource::*;
        let id = METHOD_IDS.iter().copied().find(|&m| m == s).ok_or_else(|| AdaptError::UnknownMethod(s.to_string()))?;
        let (mode, levels, labeled) = match id {
            "S" => (None, vec![], Synthetic),
            "R" => (None, vec![], Target),
            "R&S" => (None, vec![], SyntheticAndTarget),
            "S+" => (None, vec![], Randomized),
            "GRint" => (Grl, vec![Level::Int], Synthetic),
            "LFint" => (LabelFlip, vec![Level::Int], Synthetic),
            "GRout" => (Grl, vec![Level::Out], Synthetic),
            "LFout" => (LabelFlip, vec![Level::Out], Synthetic),
            "GRintGRout" => (Grl, vec![Level::Int, Level::Out], Synthetic),
            "LFintLFout" => (LabelFlip, vec![Level::Int, Level::Out], Synthetic),
            "GRintGRout+" => (Grl, vec![Level::Int, Level::Out], Randomized),
            _ => (LabelFlip, vec![Level::Int, Level::Out], Randomized),
        };
        Ok(MethodSpec { id, mode, levels, labeled })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_invariants() {
        for m in MethodSpec::all() {
            assert_eq!(m.to_string().parse::<MethodSpec>().unwrap(), m);
            if m.is_adversarial() {
                assert!(!m.uses_target_labels(), "{m}");
                assert!(!m.levels.is_empty());
            } else {
                assert!(m.levels.is_empty());
            }
            assert_eq!(m.id.ends_with('+'), m.labeled == LabeledSource::Randomized);
        }
        assert!("GRmid".parse::<MethodSpec>().is_err());
    }
}
