//! The `SSLD` dataset file.
//!
//! Little-endian throughout. Header (84 bytes):
//!
//! | offset | field |
//! |---|---|
//! | 0 | magic `SSLD` |
//! | 4 | version `u32` |
//! | 8 | record count `u64` |
//! | 16 | arrays, channels, bins, frames (`u32` each) |
//! | 32 | heatmap rows, cols (`u32` each) |
//! | 40 | domain tag `u8`, labeled `u8`, max sources `u8`, reserved `u8` |
//! | 44 | cell size, origin x, origin y, sigma (`f64` each) |
//! | 76 | generation seed `u64` |
//!
//! Each record holds the feature tensor as `f32`; labeled records follow it
//! with the heatmap (`f32`) and metadata: source count `u8` plus
//! `max_sources` position pairs (`f32`, zero padded). Unlabeled files keep
//! the metadata out of the records, in a trailing audit section (`AUDT`,
//! count `u64`, then one metadata block per record) that only evaluation
//! code opens.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use hlad_adapt::Dataset;
use hlad_metrics::{render_target, GridConfig, Position};
use hlad_sim::Domain;

use crate::error::{IoContext, PipelineError, Result};

pub const MAGIC: &[u8; 4] = b"SSLD";
pub const AUDIT_MAGIC: &[u8; 4] = b"AUDT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 84;
pub const MAX_SOURCES: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub count: u64,
    pub arrays: u32,
    /// Channels, bins, frames of one array block.
    pub feature_shape: [u32; 3],
    pub domain: Domain,
    pub labeled: bool,
    pub max_sources: u8,
    /// Rows and columns also give the stored heatmap shape.
    pub grid: GridConfig,
    pub seed: u64,
}

impl DatasetHeader {
    /// `f32` values of one record's features.
    pub fn feature_values(&self) -> usize {
        self.arrays as usize * self.feature_shape.iter().map(|&d| d as usize).product::<usize>()
    }

    pub fn heatmap_values(&self) -> usize {
        self.grid.cells()
    }

    pub fn meta_len(&self) -> u64 {
        1 + 8 * self.max_sources as u64
    }

    pub fn record_len(&self) -> u64 {
        let labels = if self.labeled { 4 * self.heatmap_values() as u64 + self.meta_len() } else { 0 };
        4 * self.feature_values() as u64 + labels
    }

    pub fn audit_len(&self) -> u64 {
        if self.labeled {
            0
        } else {
            12 + self.count * self.meta_len()
        }
    }

    /// Exact size of a well-formed file with this header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.count * self.record_len() + self.audit_len()
    }

    pub fn feature_shape_usize(&self) -> [usize; 3] {
        self.feature_shape.map(|d| d as usize)
    }

    fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN as usize);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&self.count.to_le_bytes());
        b.extend_from_slice(&self.arrays.to_le_bytes());
        for d in self.feature_shape {
            b.extend_from_slice(&d.to_le_bytes());
        }
        b.extend_from_slice(&(self.grid.rows as u32).to_le_bytes());
        b.extend_from_slice(&(self.grid.cols as u32).to_le_bytes());
        b.extend_from_slice(&[self.domain.tag(), self.labeled as u8, self.max_sources, 0]);
        for v in [self.grid.cell_size, self.grid.origin[0], self.grid.origin[1], self.grid.sigma] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&self.seed.to_le_bytes());
        debug_assert_eq!(b.len() as u64, HEADER_LEN);
        b
    }

    fn decode(b: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        let bad = |m: String| Err(PipelineError::Format(m));
        if &b[0..4] != MAGIC {
            return bad("missing SSLD magic".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return bad(format!("unsupported version {version}"));
        }
        let domain = match Domain::from_tag(b[40]) {
            Some(d) => d,
            None => return bad(format!("unknown domain tag {}", b[40])),
        };
        let labeled = match b[41] {
            0 => false,
            1 => true,
            v => return bad(format!("labeled flag {v}")),
        };
        let grid = GridConfig {
            rows: u32_at(32) as usize,
            cols: u32_at(36) as usize,
            cell_size: f64_at(44),
            origin: [f64_at(52), f64_at(60)],
            sigma: f64_at(68),
        };
        let header = Self {
            count: u64_at(8),
            arrays: u32_at(16),
            feature_shape: [u32_at(20), u32_at(24), u32_at(28)],
            domain,
            labeled,
            max_sources: b[42],
            grid,
            seed: u64_at(76),
        };
        if header.feature_values() == 0 || grid.cells() == 0 || header.max_sources == 0 {
            return bad("zero-sized feature, heatmap or metadata block".into());
        }
        if !(grid.cell_size > 0.0 && grid.sigma > 0.0) {
            return bad("grid cell size and sigma must be positive".into());
        }
        Ok(header)
    }
}

/// Positions of an unlabeled file, kept apart from anything training sees.
#[derive(Clone, Debug, PartialEq)]
pub struct SealedAudit {
    positions: Vec<Vec<Position>>,
}

impl SealedAudit {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Releases the positions for scoring.
    pub fn unseal(self) -> Vec<Vec<Position>> {
        self.positions
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    features: Vec<f32>,
    /// Labeled files only.
    positions: Option<Vec<Vec<Position>>>,
    audit: Option<SealedAudit>,
}

fn round_f32(p: &[Position]) -> Vec<Position> {
    p.iter().map(|q| [q[0] as f32 as f64, q[1] as f32 as f64]).collect()
}

impl DatasetFile {
    /// Assembles a file from generated records. Positions are rounded to
    /// `f32`, as stored, so in-memory and reloaded datasets agree bitwise.
    pub fn new(mut header: DatasetHeader, features: Vec<f32>, positions: Vec<Vec<Position>>) -> Result<Self> {
        header.count = positions.len() as u64;
        if features.len() != positions.len() * header.feature_values() {
            return Err(PipelineError::Shape(format!(
                "{} feature values for {} records of {}",
                features.len(),
                positions.len(),
                header.feature_values()
            )));
        }
        if let Some(p) = positions.iter().find(|p| p.is_empty() || p.len() > header.max_sources as usize) {
            return Err(PipelineError::Format(format!("record with {} sources (max {})", p.len(), header.max_sources)));
        }
        let positions: Vec<Vec<Position>> = positions.iter().map(|p| round_f32(p)).collect();
        let (positions, audit) = if header.labeled { (Some(positions), None) } else { (None, Some(SealedAudit { positions })) };
        Ok(Self { header, features, positions, audit })
    }

    pub fn len(&self) -> usize {
        self.header.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    /// Label positions of a labeled file; `None` for unlabeled ones, whose
    /// positions are only reachable through [`DatasetFile::take_audit`].
    pub fn positions(&self) -> Option<&[Vec<Position>]> {
        self.positions.as_deref()
    }

    pub fn take_audit(&mut self) -> Option<SealedAudit> {
        self.audit.take()
    }

    fn heatmap(&self, record: usize) -> Option<Vec<f32>> {
        self.positions.as_ref().map(|p| render_target::<f32>(&p[record], &self.header.grid).values)
    }

    fn write_meta<W: Write>(w: &mut W, p: &[Position], max: u8) -> std::io::Result<()> {
        w.write_all(&[p.len() as u8])?;
        for k in 0..max as usize {
            let q = p.get(k).copied().unwrap_or([0.0, 0.0]);
            w.write_all(&(q[0] as f32).to_le_bytes())?;
            w.write_all(&(q[1] as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        let h = &self.header;
        w.write_all(&h.encode())?;
        let n = h.feature_values();
        for r in 0..self.len() {
            for v in &self.features[r * n..(r + 1) * n] {
                w.write_all(&v.to_le_bytes())?;
            }
            if let (Some(heat), Some(p)) = (self.heatmap(r), &self.positions) {
                for v in heat {
                    w.write_all(&v.to_le_bytes())?;
                }
                Self::write_meta(&mut w, &p[r], h.max_sources)?;
            }
        }
        if let Some(audit) = &self.audit {
            w.write_all(AUDIT_MAGIC)?;
            w.write_all(&(audit.len() as u64).to_le_bytes())?;
            for p in &audit.positions {
                Self::write_meta(&mut w, p, h.max_sources)?;
            }
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).at(path)?;
        self.write(f).at(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let len = std::fs::metadata(path).at(path)?.len();
        let f = std::fs::File::open(path).at(path)?;
        Self::read(BufReader::new(f), len).map_err(|e| match e {
            PipelineError::Io { source, .. } => PipelineError::Io { path: path.into(), source },
            e => e,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read(bytes, bytes.len() as u64)
    }

    /// Parses a stream of exactly `total_len` bytes. The size implied by the
    /// header is checked before any payload is read.
    pub fn read<R: Read>(mut r: R, total_len: u64) -> Result<Self> {
        let io = |e: std::io::Error| PipelineError::Io { path: "<stream>".into(), source: e };
        if total_len < HEADER_LEN {
            return Err(PipelineError::SizeMismatch { expected: HEADER_LEN, actual: total_len });
        }
        let mut hb = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut hb).map_err(io)?;
        let header = DatasetHeader::decode(&hb)?;
        let expected = header
            .count
            .checked_mul(header.record_len())
            .and_then(|v| v.checked_add(HEADER_LEN + header.audit_len()))
            .ok_or_else(|| PipelineError::Format("header sizes overflow".into()))?;
        if expected != total_len {
            return Err(PipelineError::SizeMismatch { expected, actual: total_len });
        }
        let count = header.count as usize;
        let n = header.feature_values();
        let cells = header.heatmap_values();
        let mut features = Vec::with_capacity(count * n);
        let mut positions = header.labeled.then(|| Vec::with_capacity(count));
        let mut buf = vec![0u8; 4 * n.max(cells)];
        let mut meta = vec![0u8; header.meta_len() as usize];
        for rec in 0..count {
            r.read_exact(&mut buf[..4 * n]).map_err(io)?;
            features.extend(buf[..4 * n].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
            if let Some(pos) = positions.as_mut() {
                r.read_exact(&mut buf[..4 * cells]).map_err(io)?;
                r.read_exact(&mut meta).map_err(io)?;
                let p = parse_meta(&meta, header.max_sources, rec)?;
                let stored: Vec<f32> =
                    buf[..4 * cells].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
                if stored != render_target::<f32>(&p, &header.grid).values {
                    return Err(PipelineError::Format(format!("record {rec}: heatmap does not match its positions")));
                }
                pos.push(p);
            }
        }
        let audit = if header.labeled {
            None
        } else {
            let mut head = [0u8; 12];
            r.read_exact(&mut head).map_err(io)?;
            if &head[..4] != AUDIT_MAGIC || u64::from_le_bytes(head[4..].try_into().expect("8 bytes")) != header.count {
                return Err(PipelineError::Format("malformed audit section".into()));
            }
            let mut p = Vec::with_capacity(count);
            for rec in 0..count {
                r.read_exact(&mut meta).map_err(io)?;
                p.push(parse_meta(&meta, header.max_sources, rec)?);
            }
            Some(SealedAudit { positions: p })
        };
        Ok(Self { header, features, positions, audit })
    }

    /// View for training: labels only when the file is labeled. The audit
    /// section of an unlabeled file is not consulted.
    pub fn training_dataset(&self, name: &str) -> Result<Dataset> {
        let h = &self.header;
        Ok(Dataset::new(name, h.feature_shape_usize(), h.arrays as usize, self.features.clone(), self.positions.clone(), h.grid)?)
    }

    /// Scoring view: labeled positions, or the unsealed audit section.
    pub fn into_evaluation_dataset(mut self, name: &str) -> Result<Dataset> {
        let positions = match (self.positions.take(), self.audit.take()) {
            (Some(p), _) => p,
            (None, Some(a)) => a.unseal(),
            (None, None) => return Err(PipelineError::Format("file carries no positions".into())),
        };
        let h = &self.header;
        Ok(Dataset::new(name, h.feature_shape_usize(), h.arrays as usize, self.features, Some(positions), h.grid)?)
    }

    /// Training view that consumes the file, avoiding a feature copy.
    pub fn into_training_dataset(self, name: &str) -> Result<Dataset> {
        let h = &self.header;
        Ok(Dataset::new(name, h.feature_shape_usize(), h.arrays as usize, self.features, self.positions, h.grid)?)
    }
}

fn parse_meta(meta: &[u8], max: u8, rec: usize) -> Result<Vec<Position>> {
    let n = meta[0];
    if n == 0 || n > max {
        return Err(PipelineError::Format(format!("record {rec}: source count {n} outside 1..={max}")));
    }
    let f = |o: usize| f32::from_le_bytes(meta[o..o + 4].try_into().expect("4 bytes")) as f64;
    let p: Vec<Position> = (0..n as usize).map(|k| [f(1 + 8 * k), f(5 + 8 * k)]).collect();
    if p.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PipelineError::Format(format!("record {rec}: non-finite position")));
    }
    Ok(p)
}
