//! Synthetic multi-array recordings: shoebox image-source rendering, noise,
//! domain randomization and the STFT features fed to the localizer.

pub mod domain;
pub mod error;
pub mod render;
pub mod room;
pub mod scene;
pub mod signal;
pub mod spectra;
pub mod synth;

pub use domain::{randomize_domain, Domain};
pub use error::{Result, SimError};
pub use render::{add_noise, render, render_clean, required_signal_len, superpose, MultichannelClip, NoiseOutcome};
pub use room::{image_sources, impulse_taps, ImageSource, ImpulseTaps, Point, RoomConfig, Tap};
pub use scene::{sample_scene, MIN_SOURCE_DISTANCE_M, ArrayGeometry, Scene};
pub use signal::{make_signal, SignalKind};
pub use spectra::{assemble_features, frame_energy, stft, FeatureTensor, Spectrogram, Stft, StftConfig};
pub use synth::{Example, SimConfig, Synthesizer};
