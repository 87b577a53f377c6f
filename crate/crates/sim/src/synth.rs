//! Labeled example generation for each simulated domain.

use hlad_core::rng::{derive_seed, stream_rng};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{randomize_domain, Domain};
use crate::error::Result;
use crate::render::{add_noise, render_clean, required_signal_len, superpose};
use crate::room::{Point, RoomConfig};
use crate::scene::{sample_scene, ArrayGeometry, Scene};
use crate::signal::{make_signal, SignalKind};
use crate::spectra::{assemble_features, FeatureTensor, Stft, StftConfig};

/// Simulator settings shared by every domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Clean training room.
    pub source_room: RoomConfig,
    /// Base room whose wall distance and SNR are redrawn per record.
    pub randomized_room: RoomConfig,
    /// Mismatched room standing in for real recordings.
    pub target_room: RoomConfig,
    pub arrays: ArrayGeometry,
    pub two_source_probability: f64,
    pub nfft: usize,
    pub hop: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            source_room: RoomConfig::anechoic(),
            randomized_room: RoomConfig {
                reflection_order: 1,
                absorption: [0.3; 4],
                ..RoomConfig::anechoic()
            },
            target_room: RoomConfig::emulated_target(),
            arrays: ArrayGeometry::default(),
            two_source_probability: 0.5,
            nfft: 512,
            hop: 256,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.source_room.validate()?;
        self.randomized_room.validate()?;
        self.target_room.validate()?;
        if !(0.0..=1.0).contains(&self.two_source_probability) {
            return Err(crate::SimError::InvalidRoom("two_source_probability must lie in [0, 1]".into()));
        }
        if self.nfft < 2 || self.hop == 0 || !self.nfft.is_multiple_of(2) {
            return Err(crate::SimError::InvalidRoom("nfft must be even and hop positive".into()));
        }
        Ok(())
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig { nfft: self.nfft, hop: self.hop }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// One feature block per microphone array.
    pub features: Vec<FeatureTensor<f32>>,
    pub sources: Vec<Point>,
    pub snr_linear: f64,
    pub wall_margin: f64,
}

pub struct Synthesizer {
    config: SimConfig,
    stft: Stft<f32>,
    layout: Vec<Vec<usize>>,
}

impl Synthesizer {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let stft = Stft::new(config.stft());
        let layout = config.arrays.channel_layout();
        Ok(Self { config, stft, layout })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// `[channels, bins, frames]` of each array block.
    pub fn feature_shape(&self) -> [usize; 3] {
        let c = self.config.stft();
        let mics = self.config.arrays.arrays.first().map_or(0, Vec::len);
        [2 * mics, c.bins(), c.frames(self.config.source_room.clip_samples())]
    }

    /// Example `index` of `domain`; a pure function of `(seed, index)`.
    pub fn generate(&self, domain: Domain, seed: u64, index: u64) -> Result<Example> {
        let mut rng = stream_rng(derive_seed(seed, index), domain.tag() as u64);
        let room = match domain {
            Domain::Source => self.config.source_room.clone(),
            Domain::SourceRandomized => randomize_domain(&mut rng, &self.config.randomized_room),
            Domain::TargetEmulated => self.config.target_room.clone(),
        };
        let n_sources = if rng.random_bool(self.config.two_source_probability) { 2 } else { 1 };
        let scene = sample_scene(&mut rng, &room, &self.config.arrays, n_sources)?;
        let len = required_signal_len(&room);
        let signals: Vec<Vec<f64>> = (0..n_sources)
            .map(|_| {
                let kind = SignalKind::random(&mut rng);
                make_signal(kind, &mut rng, len, room.sample_rate)
            })
            .collect();
        let clip = match domain {
            // recorded one source at a time, mixed afterwards
            Domain::TargetEmulated => {
                let mut mix: Option<crate::MultichannelClip> = None;
                for (src, sig) in scene.sources.iter().zip(&signals) {
                    let single = Scene { sources: vec![*src], arrays: scene.arrays.clone() };
                    let (noisy, _) = add_noise(render_clean(&single, std::slice::from_ref(sig), &room)?, room.snr_linear, &mut rng);
                    mix = Some(match mix {
                        None => noisy,
                        Some(m) => superpose(&m, &noisy)?,
                    });
                }
                mix.expect("at least one source")
            }
            _ => add_noise(render_clean(&scene, &signals, &room)?, room.snr_linear, &mut rng).0,
        };
        let features = assemble_features(&clip, &self.layout, &self.stft)?;
        Ok(Example { features, sources: scene.sources, snr_linear: room.snr_linear, wall_margin: room.wall_margin })
    }
}
