use serde::{Deserialize, Serialize};

use crate::{distance, Position};

pub const MATCH_RADIUS_M: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub truth: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matched_pairs: Vec<MatchedPair>,
}

/// Greedy matching: candidate pairs within `radius`, ascending by distance
/// (ties by pred then truth index), each endpoint used at most once.
pub fn match_keypoints(preds: &[Position], truths: &[Position], radius: f64) -> MatchReport {
    let mut candidates: Vec<MatchedPair> = preds
        .iter()
        .enumerate()
        .flat_map(|(i, p)| truths.iter().enumerate().map(move |(j, t)| MatchedPair { pred: i, truth: j, distance: distance(*p, *t) }))
        .filter(|m| m.distance <= radius)
        .collect();
    candidates.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.pred.cmp(&b.pred)).then(a.truth.cmp(&b.truth)));
    let mut pred_used = vec![false; preds.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut matched_pairs = Vec::new();
    for m in candidates {
        if !pred_used[m.pred] && !truth_used[m.truth] {
            pred_used[m.pred] = true;
            truth_used[m.truth] = true;
            matched_pairs.push(m);
        }
    }
    let tp = matched_pairs.len();
    MatchReport { tp, fp: preds.len() - tp, fn_: truths.len() - tp, matched_pairs }
}
