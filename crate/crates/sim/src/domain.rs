use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::room::RoomConfig;

pub const MAX_RANDOM_WALL_MARGIN_M: f64 = 10.0;
pub const SNR_RANGE: (f64, f64) = (0.1, 1.0);

/// Draws wall distance uniformly in `[0, 10]` m and SNR log-uniformly in
/// `[0.1, 1]`; every other field is copied from `base`.
pub fn randomize_domain<R: Rng + ?Sized>(rng: &mut R, base: &RoomConfig) -> RoomConfig {
    let wall_margin = rng.random_range(0.0..=MAX_RANDOM_WALL_MARGIN_M);
    let log_snr = rng.random_range(SNR_RANGE.0.ln()..=SNR_RANGE.1.ln());
    RoomConfig { wall_margin, snr_linear: log_snr.exp(), ..base.clone() }
}

/// Which simulator configuration a dataset was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    SourceRandomized,
    TargetEmulated,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::Source => 0,
            Domain::SourceRandomized => 1,
            Domain::TargetEmulated => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Domain::Source),
            1 => Some(Domain::SourceRandomized),
            2 => Some(Domain::TargetEmulated),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::SourceRandomized => "source_randomized",
            Domain::TargetEmulated => "target_emulated",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source" => Ok(Domain::Source),
            "source_randomized" => Ok(Domain::SourceRandomized),
            "target_emulated" => Ok(Domain::TargetEmulated),
            other => Err(format!(
                "invalid domain tag '{other}' (expected source, source_randomized or target_emulated)"
            )),
        }
    }
}
