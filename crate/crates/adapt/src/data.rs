//! In-memory datasets. Labels sit behind an access counter, and the
//! unlabeled view cannot reach them at all.

use std::sync::atomic::{AtomicUsize, Ordering};

use hlad_core::{Scalar, Tensor};
use hlad_metrics::{render_target, GridConfig, Heatmap, Position};

use crate::error::{AdaptError, Result};

struct Labels {
    positions: Vec<Vec<Position>>,
    heatmaps: Vec<f32>,
    reads: AtomicUsize,
}

pub struct Dataset {
    name: String,
    feature_shape: [usize; 3],
    arrays: usize,
    features: Vec<f32>,
    len: usize,
    grid: GridConfig,
    labels: Option<Labels>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("name", &self.name)
            .field("len", &self.len)
            .field("labeled", &self.is_labeled())
            .finish()
    }
}

impl Dataset {
    /// `features` holds `len` records of `arrays` blocks of `feature_shape`.
    pub fn new(
        name: &str,
        feature_shape: [usize; 3],
        arrays: usize,
        features: Vec<f32>,
        positions: Option<Vec<Vec<Position>>>,
        grid: GridConfig,
    ) -> Result<Self> {
        let record = arrays * feature_shape.iter().product::<usize>();
        if record == 0 || !features.len().is_multiple_of(record) {
            return Err(AdaptError::DatasetMismatch(format!("{name}: {} values is not a multiple of {record}", features.len())));
        }
        let len = features.len() / record;
        let labels = match positions {
            None => None,
            Some(positions) => {
                if positions.len() != len {
                    return Err(AdaptError::DatasetMismatch(format!("{name}: {} label rows for {len} records", positions.len())));
                }
                let mut heatmaps = Vec::with_capacity(len * grid.cells());
                for p in &positions {
                    heatmaps.extend(render_target::<f32>(p, &grid).values);
                }
                Some(Labels { positions, heatmaps, reads: AtomicUsize::new(0) })
            }
        };
        Ok(Self { name: name.to_string(), feature_shape, arrays, features, len, grid, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn feature_shape(&self) -> [usize; 3] {
        self.feature_shape
    }

    pub fn arrays(&self) -> usize {
        self.arrays
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    fn block(&self) -> usize {
        self.feature_shape.iter().product()
    }

    pub fn array_features(&self, record: usize, array: usize) -> &[f32] {
        let b = self.block();
        let start = (record * self.arrays + array) * b;
        &self.features[start..start + b]
    }

    fn labels(&self) -> Result<&Labels> {
        let l = self.labels.as_ref().ok_or_else(|| AdaptError::MissingLabels(self.name.clone()))?;
        l.reads.fetch_add(1, Ordering::Relaxed);
        Ok(l)
    }

    pub fn positions(&self, record: usize) -> Result<&[Position]> {
        Ok(&self.labels()?.positions[record])
    }

    pub fn heatmap(&self, record: usize) -> Result<&[f32]> {
        let n = self.grid.cells();
        Ok(&self.labels()?.heatmaps[record * n..(record + 1) * n])
    }

    /// Number of label accesses so far.
    pub fn label_reads(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.reads.load(Ordering::Relaxed))
    }

    /// Feature-only view handed to adversarial training.
    pub fn unlabeled(&self) -> UnlabeledView<'_> {
        UnlabeledView { inner: self }
    }

    pub fn target_heatmap(&self, record: usize) -> Result<Heatmap<f32>> {
        Ok(Heatmap { grid: self.grid, values: self.heatmap(record)?.to_vec() })
    }
}

/// Features of a dataset with no path to its labels.
#[derive(Clone, Copy)]
pub struct UnlabeledView<'a> {
    inner: &'a Dataset,
}

impl<'a> UnlabeledView<'a> {
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn name(&self) -> &'a str {
        &self.inner.name
    }

    pub fn array_features(&self, record: usize, array: usize) -> &'a [f32] {
        self.inner.array_features(record, array)
    }

    pub fn arrays(&self) -> usize {
        self.inner.arrays
    }

    pub fn feature_shape(&self) -> [usize; 3] {
        self.inner.feature_shape
    }
}

/// Labeled half of a training step.
#[derive(Clone, Debug)]
pub struct LabeledBatch<T> {
    /// One `[batch, c, bins, frames]` tensor per array.
    pub arrays: Vec<Tensor<T>>,
    /// `[batch, 1, grid, grid]`.
    pub heatmaps: Tensor<T>,
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn len(&self) -> usize {
        self.heatmaps.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One adversarial step's data; the target half never carries labels.
#[derive(Clone, Debug)]
pub struct DomainBatch<T> {
    pub source: Option<LabeledBatch<T>>,
    pub target: Option<Vec<Tensor<T>>>,
}

fn cast_into<T: Scalar>(dst: &mut Vec<T>, src: &[f32]) {
    dst.extend(src.iter().map(|&v| T::from_f64_lossy(v as f64)));
}

fn array_tensors<'a, T: Scalar>(
    arrays: usize,
    shape: [usize; 3],
    n: usize,
    get: impl Fn(usize, usize) -> &'a [f32],
) -> Result<Vec<Tensor<T>>> {
    let block: usize = shape.iter().product();
    (0..arrays)
        .map(|a| {
            let mut data = Vec::with_capacity(n * block);
            for i in 0..n {
                cast_into(&mut data, get(i, a));
            }
            Ok(Tensor::new(vec![n, shape[0], shape[1], shape[2]], data)?)
        })
        .collect()
}

/// Labeled batch from `(set, record)` picks across one or more datasets.
pub fn labeled_batch<T: Scalar>(sets: &[&Dataset], picks: &[(usize, usize)]) -> Result<LabeledBatch<T>> {
    let first = sets.first().ok_or_else(|| AdaptError::DatasetMismatch("no labeled dataset".into()))?;
    let (shape, arrays, grid) = (first.feature_shape, first.arrays, first.grid);
    let arrays_t = array_tensors(arrays, shape, picks.len(), |i, a| {
        let (s, r) = picks[i];
        sets[s].array_features(r, a)
    })?;
    let mut heat = Vec::with_capacity(picks.len() * grid.cells());
    for &(s, r) in picks {
        cast_into(&mut heat, sets[s].heatmap(r)?);
    }
    let heatmaps = Tensor::new(vec![picks.len(), 1, grid.rows, grid.cols], heat)?;
    Ok(LabeledBatch { arrays: arrays_t, heatmaps })
}

/// Feature-only batch of the given records.
pub fn unlabeled_batch<T: Scalar>(view: UnlabeledView<'_>, records: &[usize]) -> Result<Vec<Tensor<T>>> {
    array_tensors(view.arrays(), view.feature_shape(), records.len(), |i, a| view.array_features(records[i], a))
}
