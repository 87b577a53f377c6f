//! Synthetic source signals standing in for music recordings.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SignalKind {
    /// Gaussian noise restricted to `[low_hz, high_hz]`.
    BandNoise { low_hz: f64, high_hz: f64 },
    /// Up to eight harmonics of `f0` with decaying random amplitudes.
    Harmonic { f0: f64 },
}

impl SignalKind {
    /// Draws a kind with random parameters.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random_bool(0.5) {
            let low_hz = rng.random_range(100.0..2000.0);
            let width = rng.random_range(500.0..4000.0);
            SignalKind::BandNoise { low_hz, high_hz: (low_hz + width).min(7900.0) }
        } else {
            SignalKind::Harmonic { f0: rng.random_range(110.0..880.0) }
        }
    }
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in &mut x {
            *v /= rms;
        }
    }
    x
}

/// Unit-RMS signal of `length` samples at `sample_rate`.
pub fn make_signal<R: Rng + ?Sized>(kind: SignalKind, rng: &mut R, length: usize, sample_rate: f64) -> Vec<f64> {
    let nyquist = sample_rate / 2.0;
    match kind {
        SignalKind::Harmonic { f0 } => {
            let mut x = vec![0.0; length];
            let mut k = 1;
            while k <= 8 && (k as f64) * f0 < nyquist {
                let amp = if k == 1 { 1.0 } else { rng.random_range(0.1..0.9) / k as f64 };
                let phase = rng.random_range(0.0..2.0 * PI);
                let w = 2.0 * PI * k as f64 * f0 / sample_rate;
                for (n, v) in x.iter_mut().enumerate() {
                    *v += amp * (w * n as f64 + phase).sin();
                }
                k += 1;
            }
            normalize(x)
        }
        SignalKind::BandNoise { low_hz, high_hz } => {
            let mut buf: Vec<Complex<f64>> =
                (0..length).map(|_| Complex::new(rng.sample(StandardNormal), 0.0)).collect();
            let mut planner = FftPlanner::new();
            planner.plan_fft_forward(length).process(&mut buf);
            for (k, c) in buf.iter_mut().enumerate() {
                let bin = k.min(length - k);
                let f = bin as f64 * sample_rate / length as f64;
                if f < low_hz || f > high_hz {
                    *c = Complex::new(0.0, 0.0);
                }
            }
            planner.plan_fft_inverse(length).process(&mut buf);
            normalize(buf.into_iter().map(|c| c.re).collect())
        }
    }
}
