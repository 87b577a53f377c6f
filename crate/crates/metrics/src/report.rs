use serde::{Deserialize, Serialize};

use crate::matching::MatchReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when nothing was matched.
    pub rmse: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, sum_sq_distance: f64) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let rmse = (tp > 0).then(|| (sum_sq_distance / tp as f64).sqrt());
        Self { precision, recall, f1, rmse, tp, fp, fn_ }
    }
}

/// Pools counts and matched distances over an evaluation set.
pub fn metrics<'a, I: IntoIterator<Item = &'a MatchReport>>(reports: I) -> Metrics {
    let (mut tp, mut fp, mut fn_, mut sq) = (0, 0, 0, 0.0);
    for r in reports {
        tp += r.tp;
        fp += r.fp;
        fn_ += r.fn_;
        sq += r.matched_pairs.iter().map(|m| m.distance * m.distance).sum::<f64>();
    }
    Metrics::from_counts(tp, fp, fn_, sq)
}

/// One evaluation, as written to JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub seed: u64,
    pub epoch: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::MatchedPair;

    fn report(tp: usize, fp: usize, fn_: usize, d: &[f64]) -> MatchReport {
        let matched_pairs = d.iter().map(|&distance| MatchedPair { pred: 0, truth: 0, distance }).collect();
        MatchReport { tp, fp, fn_, matched_pairs }
    }

    #[test]
    fn counts_to_scores() {
        let m = metrics(&[report(2, 1, 1, &[0.3, 0.4])]);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse.unwrap() - 0.125f64.sqrt()).abs() < 1e-15);
        assert!((m.rmse.unwrap() - 0.3536).abs() < 1e-4);
    }

    #[test]
    fn harmonic_mean_of_reported_upper_bound() {
        let (p, r) = (0.95f64, 0.71);
        let f1 = 2.0 * p * r / (p + r);
        assert!((f1 - 0.813).abs() < 5e-4, "{f1}");
    }

    #[test]
    fn no_predictions() {
        let m = metrics(&[report(0, 0, 3, &[])]);
        assert_eq!((m.precision, m.recall, m.f1, m.rmse), (1.0, 0.0, 0.0, None));
    }

    #[test]
    fn pooled_over_reports() {
        let m = metrics(&[report(1, 0, 0, &[0.3]), report(1, 1, 0, &[0.4])]);
        assert_eq!((m.tp, m.fp, m.fn_), (2, 1, 0));
        assert!((m.rmse.unwrap() - 0.125f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn record_json_fields() {
        let rec = EvalRecord { method: "S".into(), seed: 1, epoch: 3, metrics: Metrics::from_counts(1, 0, 1, 0.25) };
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["epoch", "f1", "fn", "fp", "method", "precision", "recall", "rmse", "seed", "tp"]);
        let back: EvalRecord = serde_json::from_str(&v.to_string()).unwrap();
        assert_eq!(back, rec);
    }
}
