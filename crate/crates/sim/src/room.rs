//! Shoebox geometry and the image-source model in the horizontal plane.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Duration of one rendered record, seconds.
pub const CLIP_SECONDS: f64 = 0.16;
/// Direct-path gains use `1 / max(d, GAIN_FLOOR_M)`.
pub const GAIN_FLOOR_M: f64 = 0.1;
pub const MAX_REFLECTION_ORDER: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Index of each wall in [`RoomConfig::absorption`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wall {
    XLow = 0,
    XHigh = 1,
    YLow = 2,
    YHigh = 3,
}

/// Square active area surrounded by four walls at `wall_margin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomConfig {
    pub area_size: f64,
    pub wall_margin: f64,
    pub reflection_order: u32,
    /// Amplitude absorption per wall, ordered x-low, x-high, y-low, y-high.
    pub absorption: [f64; 4],
    /// Signal to noise power ratio; `None` in JSON means noiseless.
    #[serde(with = "snr_serde")]
    pub snr_linear: f64,
    pub sample_rate: f64,
    pub speed_of_sound: f64,
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self::anechoic()
    }
}

impl RoomConfig {
    /// Anechoic chamber with a low noise floor.
    pub fn anechoic() -> Self {
        Self {
            area_size: 6.0,
            wall_margin: 0.0,
            reflection_order: 0,
            absorption: [1.0; 4],
            snr_linear: 100.0,
            sample_rate: 16_000.0,
            speed_of_sound: 343.0,
        }
    }

    /// Reverberant, noisy stand-in for the real recording room.
    pub fn emulated_target() -> Self {
        Self {
            wall_margin: 0.5,
            reflection_order: 1,
            absorption: [0.3, 0.2, 0.3, 0.2],
            snr_linear: 1.0,
            ..Self::anechoic()
        }
    }

    // negated comparisons reject NaN as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidRoom(msg));
        if !(self.area_size > 0.0) {
            return bad(format!("area_size must be positive, got {}", self.area_size));
        }
        if !(self.wall_margin >= 0.0) {
            return bad(format!("wall_margin must be >= 0, got {}", self.wall_margin));
        }
        if self.reflection_order > MAX_REFLECTION_ORDER {
            return bad(format!("reflection_order {} exceeds {MAX_REFLECTION_ORDER}", self.reflection_order));
        }
        if self.absorption.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad(format!("absorption must lie in [0, 1], got {:?}", self.absorption));
        }
        if !(self.snr_linear > 0.0) {
            return bad(format!("snr_linear must be > 0, got {}", self.snr_linear));
        }
        if !(self.sample_rate > 0.0 && self.speed_of_sound > 0.0) {
            return bad("sample_rate and speed_of_sound must be positive".into());
        }
        Ok(())
    }

    /// Wall coordinates `(low, high)`, identical on both axes.
    pub fn walls(&self) -> (f64, f64) {
        (-self.wall_margin, self.area_size + self.wall_margin)
    }

    pub fn clip_samples(&self) -> usize {
        (CLIP_SECONDS * self.sample_rate).round() as usize
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.area_size).contains(&p.x) && (0.0..=self.area_size).contains(&p.y)
    }

    /// Upper bound on any tap delay in samples, from the extent of the
    /// image lattice up to `reflection_order`.
    pub fn max_delay_samples(&self) -> usize {
        let (lo, hi) = self.walls();
        let span = (hi - lo) * (self.reflection_order as f64 + 1.0);
        let max_dist = span * std::f64::consts::SQRT_2;
        (max_dist / self.speed_of_sound * self.sample_rate).ceil() as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageSource {
    pub position: Point,
    pub gain: f64,
    pub order: u32,
}

/// Alternating wall sequences along one axis with at most `max_len`
/// reflections; the empty sequence comes first.
fn axis_sequences(max_len: u32, low: Wall, high: Wall) -> Vec<Vec<Wall>> {
    let mut out = vec![Vec::new()];
    for len in 1..=max_len {
        for start in [low, high] {
            let seq = (0..len)
                .map(|i| if i % 2 == 0 { start } else if start == low { high } else { low })
                .collect();
            out.push(seq);
        }
    }
    out
}

fn reflect(coord: f64, wall: Wall, walls: (f64, f64)) -> f64 {
    match wall {
        Wall::XLow | Wall::YLow => 2.0 * walls.0 - coord,
        Wall::XHigh | Wall::YHigh => 2.0 * walls.1 - coord,
    }
}

/// Mirror images of `src` up to the configured reflection order, ordered by
/// image order. Each reflection scales the gain by `1 - absorption`.
pub fn image_sources(room: &RoomConfig, src: Point) -> Vec<ImageSource> {
    let walls = room.walls();
    let order = room.reflection_order;
    let xs = axis_sequences(order, Wall::XLow, Wall::XHigh);
    let ys = axis_sequences(order, Wall::YLow, Wall::YHigh);
    let mut images = Vec::new();
    for total in 0..=order {
        for xseq in &xs {
            for yseq in &ys {
                if (xseq.len() + yseq.len()) as u32 != total {
                    continue;
                }
                let mut p = src;
                let mut gain = 1.0;
                for &w in xseq {
                    p.x = reflect(p.x, w, walls);
                    gain *= 1.0 - room.absorption[w as usize];
                }
                for &w in yseq {
                    p.y = reflect(p.y, w, walls);
                    gain *= 1.0 - room.absorption[w as usize];
                }
                images.push(ImageSource { position: p, gain, order: total });
            }
        }
    }
    images
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    /// Seconds.
    pub delay: f64,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseTaps {
    pub taps: Vec<Tap>,
}

/// Delay and spreading gain of every image path from `src` to `mic`.
pub fn impulse_taps(room: &RoomConfig, src: Point, mic: Point) -> ImpulseTaps {
    let taps = image_sources(room, src)
        .into_iter()
        .map(|img| {
            let d = img.position.distance(&mic);
            Tap { delay: d / room.speed_of_sound, gain: img.gain / d.max(GAIN_FLOOR_M) }
        })
        .collect();
    ImpulseTaps { taps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(order: u32) -> RoomConfig {
        RoomConfig { reflection_order: order, wall_margin: 1.0, absorption: [0.2; 4], ..RoomConfig::anechoic() }
    }

    #[test]
    fn order_zero_is_the_source() {
        let imgs = image_sources(&room(0), Point::new(1.0, 2.0));
        assert_eq!(imgs, vec![ImageSource { position: Point::new(1.0, 2.0), gain: 1.0, order: 0 }]);
    }

    #[test]
    fn first_order_mirrors_each_wall() {
        let r = room(1);
        let (lo, hi) = r.walls();
        let (x, y) = (1.0, 2.0);
        let imgs = image_sources(&r, Point::new(x, y));
        assert_eq!(imgs.len(), 5);
        let mut expect = vec![
            Point::new(2.0 * lo - x, y),
            Point::new(2.0 * hi - x, y),
            Point::new(x, 2.0 * lo - y),
            Point::new(x, 2.0 * hi - y),
        ];
        for img in &imgs[1..] {
            let k = expect.iter().position(|p| p == &img.position).expect("unexpected image");
            expect.remove(k);
            assert_eq!(img.gain, 0.8);
        }
        assert!(expect.is_empty());
    }

    #[test]
    fn second_order_count_and_uniqueness() {
        let imgs = image_sources(&room(2), Point::new(1.3, 4.1));
        // 1 + 4 + 8 distinct images in a rectangle
        assert_eq!(imgs.len(), 13);
        for (i, a) in imgs.iter().enumerate() {
            for b in &imgs[i + 1..] {
                assert!(a.position.distance(&b.position) > 1e-9);
            }
        }
    }

    #[test]
    fn full_absorption_zeroes_images() {
        let r = RoomConfig { absorption: [1.0; 4], ..room(1) };
        let imgs = image_sources(&r, Point::new(3.0, 3.0));
        assert!(imgs[1..].iter().all(|i| i.gain == 0.0));
    }

    #[test]
    fn tap_delay_and_spreading() {
        let r = RoomConfig::anechoic();
        let t = impulse_taps(&r, Point::new(0.0, 0.0), Point::new(3.43, 0.0));
        assert_eq!(t.taps.len(), 1);
        assert!((t.taps[0].delay - 0.010).abs() < 1e-12);
        let near = impulse_taps(&r, Point::new(0.0, 0.0), Point::new(1.0, 0.0)).taps[0].gain;
        let far = impulse_taps(&r, Point::new(0.0, 0.0), Point::new(2.0, 0.0)).taps[0].gain;
        assert!((near / far - 2.0).abs() < 1e-12);
        let floor = impulse_taps(&r, Point::new(0.0, 0.0), Point::new(0.01, 0.0)).taps[0].gain;
        assert_eq!(floor, 1.0 / GAIN_FLOOR_M);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        assert!(RoomConfig::anechoic().validate().is_ok());
        assert!(RoomConfig { wall_margin: -1.0, ..RoomConfig::anechoic() }.validate().is_err());
        assert!(RoomConfig { reflection_order: 3, ..RoomConfig::anechoic() }.validate().is_err());
        assert!(RoomConfig { snr_linear: 0.0, ..RoomConfig::anechoic() }.validate().is_err());
        assert!(RoomConfig { absorption: [1.5; 4], ..RoomConfig::anechoic() }.validate().is_err());
    }

    #[test]
    fn json_encodes_infinite_snr_as_null() {
        let r = RoomConfig { snr_linear: f64::INFINITY, ..RoomConfig::anechoic() };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"snr_linear\":null"));
        let back: RoomConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.snr_linear, f64::INFINITY);
        let partial: RoomConfig = serde_json::from_str(r#"{"wall_margin": 2.0}"#).unwrap();
        assert_eq!(partial.wall_margin, 2.0);
        assert_eq!(partial.area_size, 6.0);
    }
}
