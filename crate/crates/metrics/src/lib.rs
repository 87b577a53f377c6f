//! Ground-truth heatmaps, keypoint extraction, greedy matching and
//! precision/recall/F1/RMSE.

mod heatmap;
mod matching;
mod report;

pub use heatmap::{extract_keypoints, render_target, GridConfig, Heatmap, Keypoint, DETECTION_THRESHOLD};
pub use matching::{match_keypoints, MatchReport, MatchedPair, MATCH_RADIUS_M};
pub use report::{metrics, EvalRecord, Metrics};

/// Planar position in meters, `[x, y]`.
pub type Position = [f64; 2];

pub fn distance(a: Position, b: Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub type Heatmap32 = Heatmap<f32>;
pub type Heatmap64 = Heatmap<f64>;
