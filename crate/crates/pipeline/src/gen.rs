//! Dataset generation from the simulator.

use std::path::Path;

use hlad_metrics::{GridConfig, Position};
use hlad_sim::{Domain, SimConfig, Synthesizer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetFile, DatasetHeader, MAX_SOURCES};
use crate::error::{IoContext, PipelineError, Result};

/// Contents of a generation config file: simulator settings plus the
/// heatmap grid labels are rendered on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub grid: GridConfig,
}

impl GenConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Manifest {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Acoustic conditions a record was rendered under. Not stored in the file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordConditions {
    pub snr_linear: f64,
    pub wall_margin: f64,
}

/// `count` records of `domain`, each a pure function of `(seed, index)`,
/// generated in parallel.
pub fn generate(config: &GenConfig, domain: Domain, seed: u64, count: usize, labeled: bool) -> Result<DatasetFile> {
    generate_with_conditions(config, domain, seed, count, labeled).map(|(f, _)| f)
}

/// [`generate`], also returning each record's conditions.
pub fn generate_with_conditions(
    config: &GenConfig,
    domain: Domain,
    seed: u64,
    count: usize,
    labeled: bool,
) -> Result<(DatasetFile, Vec<RecordConditions>)> {
    let synth = Synthesizer::new(config.sim.clone())?;
    let shape = synth.feature_shape();
    let arrays = config.sim.arrays.arrays.len();
    let header = DatasetHeader {
        count: count as u64,
        arrays: arrays as u32,
        feature_shape: shape.map(|d| d as u32),
        domain,
        labeled,
        max_sources: MAX_SOURCES,
        grid: config.grid,
        seed,
    };
    let n = header.feature_values();
    let mut features = vec![0.0f32; count * n];
    let records = features
        .par_chunks_mut(n.max(1))
        .enumerate()
        .map(|(i, slot)| -> Result<(Vec<Position>, RecordConditions)> {
            let ex = synth.generate(domain, seed, i as u64)?;
            let mut off = 0;
            for block in &ex.features {
                slot[off..off + block.data.len()].copy_from_slice(&block.data);
                off += block.data.len();
            }
            let cond = RecordConditions { snr_linear: ex.snr_linear, wall_margin: ex.wall_margin };
            Ok((ex.sources.iter().map(|p| [p.x, p.y]).collect(), cond))
        })
        .collect::<Result<Vec<_>>>()?;
    let (positions, conditions): (Vec<_>, Vec<_>) = records.into_iter().unzip();
    Ok((DatasetFile::new(header, features, positions)?, conditions))
}
