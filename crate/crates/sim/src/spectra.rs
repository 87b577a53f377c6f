//! Short-time Fourier transform and per-array feature tensors.

use std::sync::Arc;

use hlad_core::Scalar;
use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::error::{Result, SimError};
use crate::render::MultichannelClip;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub nfft: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { nfft: 512, hop: 256 }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        if len < self.nfft {
            0
        } else {
            1 + (len - self.nfft) / self.hop
        }
    }
}

/// One-sided spectra, `frames[t][k]` for `k < nfft/2 + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram<T> {
    pub frames: Vec<Vec<Complex<T>>>,
}

/// Reusable Hann-windowed STFT.
pub struct Stft<T: FftNum> {
    config: StftConfig,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar + FftNum> Stft<T> {
    pub fn new(config: StftConfig) -> Self {
        let n = config.nfft;
        // periodic Hann
        let window = (0..n)
            .map(|i| T::from_f64_lossy(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Self { config, window, fft }
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn process(&self, signal: &[T]) -> Result<Spectrogram<T>> {
        let c = self.config;
        if signal.len() < c.nfft {
            return Err(SimError::SignalTooShort { needed: c.nfft, actual: signal.len() });
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); c.nfft];
        let frames = (0..c.frames(signal.len()))
            .map(|t| {
                let seg = &signal[t * c.hop..t * c.hop + c.nfft];
                for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                    *b = Complex::new(s * w, T::zero());
                }
                self.fft.process(&mut buf);
                buf[..c.bins()].to_vec()
            })
            .collect();
        Ok(Spectrogram { frames })
    }
}

/// Convenience wrapper building a one-off [`Stft`].
pub fn stft<T: Scalar + FftNum>(signal: &[T], config: StftConfig) -> Result<Spectrogram<T>> {
    Stft::new(config).process(signal)
}

/// Full-spectrum energy of a one-sided frame (even `nfft`).
pub fn frame_energy<T: Scalar>(frame: &[Complex<T>]) -> T {
    let last = frame.len() - 1;
    frame
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let e = c.norm_sqr();
            if k == 0 || k == last {
                e
            } else {
                e + e
            }
        })
        .sum()
}

/// `channels x bins x frames` block for one microphone array, with channels
/// ordered `[mic0.re, mic0.im, mic1.re, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor<T> {
    pub channels: usize,
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.bins, self.frames]
    }

    pub fn at(&self, c: usize, k: usize, t: usize) -> T {
        self.data[(c * self.bins + k) * self.frames + t]
    }
}

/// STFT of every mic, grouped per array. Values are divided by the window's
/// root energy so a unit-RMS white signal has unit expected bin magnitude.
pub fn assemble_features(clip: &MultichannelClip, layout: &[Vec<usize>], stft: &Stft<f32>) -> Result<Vec<FeatureTensor<f32>>> {
    let used: usize = layout.iter().map(Vec::len).sum();
    if used != clip.channels || layout.iter().flatten().any(|&c| c >= clip.channels) {
        return Err(SimError::LayoutMismatch(format!("layout {layout:?} for {} channels", clip.channels)));
    }
    let cfg = stft.config();
    let (bins, frames) = (cfg.bins(), cfg.frames(clip.len));
    let scale = 1.0 / stft.window().iter().map(|w| w * w).sum::<f32>().sqrt();
    layout
        .iter()
        .map(|mics| {
            let channels = 2 * mics.len();
            let mut data = vec![0.0f32; channels * bins * frames];
            for (m, &ch) in mics.iter().enumerate() {
                let spec = stft.process(clip.channel(ch))?;
                for (t, frame) in spec.frames.iter().enumerate() {
                    for (k, c) in frame.iter().enumerate() {
                        data[((2 * m) * bins + k) * frames + t] = c.re * scale;
                        data[((2 * m + 1) * bins + k) * frames + t] = c.im * scale;
                    }
                }
            }
            Ok(FeatureTensor { channels, bins, frames, data })
        })
        .collect()
}
