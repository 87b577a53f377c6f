//! Multichannel rendering, noise and superposition.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::room::{impulse_taps, RoomConfig};
use crate::scene::Scene;

/// `channels x len` samples, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MultichannelClip {
    pub channels: usize,
    pub len: usize,
    pub sample_rate: f64,
    pub samples: Vec<f32>,
}

impl MultichannelClip {
    pub fn zeros(channels: usize, len: usize, sample_rate: f64) -> Self {
        Self { channels, len, sample_rate, samples: vec![0.0; channels * len] }
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        &self.samples[k * self.len..(k + 1) * self.len]
    }

    pub fn duration(&self) -> f64 {
        self.len as f64 / self.sample_rate
    }

    /// Mean squared sample value over every channel.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / self.samples.len() as f64
    }

    /// Raw little-endian `f32` dump, channel-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Signal length needed by [`render`] for a clip in `room`.
pub fn required_signal_len(room: &RoomConfig) -> usize {
    room.clip_samples() + room.max_delay_samples() + 2
}

fn interp(signal: &[f64], t: f64) -> f64 {
    let i = t.floor();
    let f = t - i;
    let i = i as isize;
    let at = |k: isize| if k >= 0 && (k as usize) < signal.len() { signal[k as usize] } else { 0.0 };
    (1.0 - f) * at(i) + f * at(i + 1)
}

/// Renders every source through its image taps onto every mic, without
/// noise.
///
/// Output sample `n` reads the source signal at
/// `n + room.max_delay_samples() - delay * fs`, so a fixed lead-in keeps all
/// delayed copies inside the signal buffer. The lead-in depends only on the
/// room, which makes rendering exactly additive over sources.
pub fn render_clean(scene: &Scene, signals: &[Vec<f64>], room: &RoomConfig) -> Result<MultichannelClip> {
    if signals.len() != scene.sources.len() {
        return Err(SimError::SignalCount { expected: scene.sources.len(), actual: signals.len() });
    }
    let needed = required_signal_len(room);
    if let Some(short) = signals.iter().find(|s| s.len() < needed) {
        return Err(SimError::SignalTooShort { needed, actual: short.len() });
    }
    let fs = room.sample_rate;
    let len = room.clip_samples();
    let lead = room.max_delay_samples() as f64;
    let mics = scene.arrays.mics();
    let mut clip = MultichannelClip::zeros(mics.len(), len, fs);
    let mut acc = vec![0.0f64; len];
    for (k, mic) in mics.iter().enumerate() {
        acc.fill(0.0);
        for (src, sig) in scene.sources.iter().zip(signals) {
            for tap in impulse_taps(room, *src, *mic).taps {
                if tap.gain == 0.0 {
                    continue;
                }
                let offset = lead - tap.delay * fs;
                for (n, a) in acc.iter_mut().enumerate() {
                    *a += tap.gain * interp(sig, n as f64 + offset);
                }
            }
        }
        for (dst, &a) in clip.samples[k * len..(k + 1) * len].iter_mut().zip(&acc) {
            *dst = a as f32;
        }
    }
    Ok(clip)
}

/// Renders the scene and adds noise at the room's SNR.
pub fn render<R: Rng + ?Sized>(
    scene: &Scene,
    signals: &[Vec<f64>],
    room: &RoomConfig,
    rng: &mut R,
) -> Result<(MultichannelClip, NoiseOutcome)> {
    let clip = render_clean(scene, signals, room)?;
    Ok(add_noise(clip, room.snr_linear, rng))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseOutcome {
    Added { noise_power: f64 },
    /// Infinite SNR, clip unchanged.
    Noiseless,
    /// Zero signal power; noise scaling is undefined so nothing was added.
    SilentClip,
}

/// Adds white Gaussian noise with power `signal_power / snr_linear`.
pub fn add_noise<R: Rng + ?Sized>(mut clip: MultichannelClip, snr_linear: f64, rng: &mut R) -> (MultichannelClip, NoiseOutcome) {
    if snr_linear.is_infinite() {
        return (clip, NoiseOutcome::Noiseless);
    }
    let power = clip.power();
    if power == 0.0 {
        return (clip, NoiseOutcome::SilentClip);
    }
    let noise_power = power / snr_linear;
    let sigma = noise_power.sqrt();
    for v in &mut clip.samples {
        let n: f64 = rng.sample(StandardNormal);
        *v = (*v as f64 + sigma * n) as f32;
    }
    (clip, NoiseOutcome::Added { noise_power })
}

/// Element-wise sum of two clips of identical shape and rate.
pub fn superpose(a: &MultichannelClip, b: &MultichannelClip) -> Result<MultichannelClip> {
    if a.channels != b.channels || a.len != b.len || a.sample_rate != b.sample_rate {
        return Err(SimError::ShapeMismatch(format!(
            "{}x{}@{} vs {}x{}@{}",
            a.channels, a.len, a.sample_rate, b.channels, b.len, b.sample_rate
        )));
    }
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
    Ok(MultichannelClip { samples, ..a.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::Point;
    use crate::scene::ArrayGeometry;
    use crate::signal::{make_signal, SignalKind};
    use hlad_core::rng::stream_rng;

    fn noise_signal(room: &RoomConfig, seed: u64) -> Vec<f64> {
        let kind = SignalKind::BandNoise { low_hz: 200.0, high_hz: 4000.0 };
        make_signal(kind, &mut stream_rng(seed, 0), required_signal_len(room), room.sample_rate)
    }

    #[test]
    fn equidistant_mics_get_identical_channels() {
        let room = RoomConfig { snr_linear: f64::INFINITY, ..RoomConfig::anechoic() };
        let arrays = ArrayGeometry { arrays: vec![vec![Point::new(1.0, 3.0), Point::new(5.0, 3.0)]] };
        let scene = Scene { sources: vec![Point::new(3.0, 1.0)], arrays };
        let (clip, outcome) = render(&scene, &[noise_signal(&room, 1)], &room, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(outcome, NoiseOutcome::Noiseless);
        assert_eq!(clip.channel(0), clip.channel(1));
    }

    #[test]
    fn short_signal_rejected() {
        let room = RoomConfig::anechoic();
        let scene = Scene { sources: vec![Point::new(3.0, 3.0)], arrays: ArrayGeometry::default() };
        let err = render_clean(&scene, &[vec![0.0; 100]], &room).unwrap_err();
        assert!(matches!(err, SimError::SignalTooShort { .. }));
        assert!(render_clean(&scene, &[], &room).is_err());
    }

    #[test]
    fn noise_cases() {
        let silent = MultichannelClip::zeros(2, 16, 16_000.0);
        let (out, outcome) = add_noise(silent.clone(), 1.0, &mut stream_rng(0, 0));
        assert_eq!(outcome, NoiseOutcome::SilentClip);
        assert_eq!(out, silent);
        let mut clip = MultichannelClip::zeros(1, 4, 16_000.0);
        clip.samples = vec![1.0, -1.0, 1.0, -1.0];
        let (a, _) = add_noise(clip.clone(), 2.0, &mut stream_rng(4, 0));
        let (b, _) = add_noise(clip.clone(), 2.0, &mut stream_rng(4, 0));
        assert_eq!(a, b);
        assert_eq!(add_noise(clip.clone(), f64::INFINITY, &mut stream_rng(4, 0)).0, clip);
    }

    #[test]
    fn superpose_identities() {
        let mut a = MultichannelClip::zeros(2, 3, 16_000.0);
        a.samples = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut b = a.clone();
        b.samples.reverse();
        let z = MultichannelClip::zeros(2, 3, 16_000.0);
        assert_eq!(superpose(&a, &z).unwrap(), a);
        assert_eq!(superpose(&a, &b).unwrap(), superpose(&b, &a).unwrap());
        assert!(superpose(&a, &MultichannelClip::zeros(3, 2, 16_000.0)).is_err());
    }
}
