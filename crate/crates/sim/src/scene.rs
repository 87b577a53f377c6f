use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::room::{Point, RoomConfig};

pub const MIN_SOURCE_DISTANCE_M: f64 = 2.0;
const REJECTION_BUDGET: usize = 10_000;

/// Microphone positions of each array, in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub arrays: Vec<Vec<Point>>,
}

impl Default for ArrayGeometry {
    /// Two 4-mic, 10 cm square arrays at opposite corners of the 6 m area.
    fn default() -> Self {
        Self { arrays: vec![square_array(Point::new(0.5, 0.5), 0.1), square_array(Point::new(5.5, 5.5), 0.1)] }
    }
}

pub fn square_array(center: Point, side: f64) -> Vec<Point> {
    let h = side / 2.0;
    vec![
        Point::new(center.x - h, center.y - h),
        Point::new(center.x + h, center.y - h),
        Point::new(center.x + h, center.y + h),
        Point::new(center.x - h, center.y + h),
    ]
}

impl ArrayGeometry {
    pub fn mic_count(&self) -> usize {
        self.arrays.iter().map(Vec::len).sum()
    }

    /// Flattened mic list; channel `k` of a clip is `mics()[k]`.
    pub fn mics(&self) -> Vec<Point> {
        self.arrays.iter().flatten().copied().collect()
    }

    /// Channel indices of each array.
    pub fn channel_layout(&self) -> Vec<Vec<usize>> {
        let mut next = 0;
        self.arrays
            .iter()
            .map(|a| {
                let idx = (next..next + a.len()).collect();
                next += a.len();
                idx
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub sources: Vec<Point>,
    pub arrays: ArrayGeometry,
}

/// Uniform source positions in the active area, resampled until all pairs
/// are at least [`MIN_SOURCE_DISTANCE_M`] apart.
pub fn sample_scene<R: Rng + ?Sized>(
    rng: &mut R,
    room: &RoomConfig,
    arrays: &ArrayGeometry,
    n_sources: usize,
) -> Result<Scene> {
    if !(1..=2).contains(&n_sources) {
        return Err(SimError::SourceCount(n_sources));
    }
    let a = room.area_size;
    for _ in 0..REJECTION_BUDGET {
        let sources: Vec<Point> = (0..n_sources)
            .map(|_| Point::new(rng.random_range(0.0..=a), rng.random_range(0.0..=a)))
            .collect();
        let ok = sources
            .iter()
            .enumerate()
            .all(|(i, p)| sources[i + 1..].iter().all(|q| p.distance(q) >= MIN_SOURCE_DISTANCE_M));
        if ok {
            return Ok(Scene { sources, arrays: arrays.clone() });
        }
    }
    Err(SimError::RejectionBudget { n_sources, min_distance: MIN_SOURCE_DISTANCE_M, attempts: REJECTION_BUDGET })
}
