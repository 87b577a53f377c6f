use std::collections::HashMap;

use rand::Rng as _;

use crate::error::{GradError, Result};
use crate::rng::{name_stream, stream_rng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Initialization rule for a parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// U(-sqrt(6/fan_in), sqrt(6/fan_in)), for layers followed by relu.
    HeUniform { fan_in: usize },
    /// U(-sqrt(6/(fan_in+fan_out)), ..), everything else.
    GlorotUniform { fan_in: usize, fan_out: usize },
    Zeros,
}

impl Init {
    fn bound(&self) -> f64 {
        match *self {
            Init::HeUniform { fan_in } => (6.0 / fan_in as f64).sqrt(),
            Init::GlorotUniform { fan_in, fan_out } => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            Init::Zeros => 0.0,
        }
    }
}

/// Named parameter tensors with stable ids.
///
/// Each tensor is drawn from its own stream keyed by `(seed, name)`, so
/// initial values do not depend on insertion order.
#[derive(Clone, Debug)]
pub struct ParamSet<T> {
    seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new(seed: u64) -> Self {
        Self { seed, names: Vec::new(), tensors: Vec::new(), index: HashMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: &str, shape: Vec<usize>, init: Init) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(GradError::InvalidGraph(format!("duplicate parameter name {name}")));
        }
        let mut tensor = Tensor::zeros(shape);
        let bound = init.bound();
        if bound > 0.0 {
            let mut rng = stream_rng(self.seed, name_stream(name));
            for v in tensor.data_mut() {
                *v = T::from_f64_lossy(rng.random_range(-bound..bound));
            }
        }
        Ok(self.push(name, tensor))
    }

    /// Inserts a tensor with explicit values.
    pub fn insert(&mut self, name: &str, tensor: Tensor<T>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(GradError::InvalidGraph(format!("duplicate parameter name {name}")));
        }
        Ok(self.push(name, tensor))
    }

    fn push(&mut self, name: &str, tensor: Tensor<T>) -> ParamId {
        let id = ParamId(self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Ids whose name starts with `prefix`, in insertion order.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.ids().filter(|&id| self.names[id.0].starts_with(prefix)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            seed: self.seed,
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
            index: self.index.clone(),
        }
    }

    /// FNV hash over the raw bit patterns of the selected tensors.
    pub fn fingerprint(&self, ids: &[ParamId]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &id in ids {
            for v in self.get(id).data() {
                let bits = v.to_f64_lossy().to_bits();
                h ^= bits;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_order_independent() {
        let mut a = ParamSet::<f32>::new(3);
        let wa = a.add("w", vec![4, 4], Init::HeUniform { fan_in: 4 }).unwrap();
        let mut b = ParamSet::<f32>::new(3);
        b.add("other", vec![2], Init::GlorotUniform { fan_in: 1, fan_out: 2 }).unwrap();
        let wb = b.add("w", vec![4, 4], Init::HeUniform { fan_in: 4 }).unwrap();
        assert_eq!(a.get(wa), b.get(wb));
    }

    #[test]
    fn he_bound_respected() {
        let mut p = ParamSet::<f64>::new(0);
        let id = p.add("w", vec![1000], Init::HeUniform { fan_in: 6 }).unwrap();
        assert!(p.get(id).max_abs() <= 1.0);
        let z = p.add("b", vec![3], Init::Zeros).unwrap();
        assert_eq!(p.get(z).sum(), 0.0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::<f32>::new(0);
        p.add("w", vec![1], Init::Zeros).unwrap();
        assert!(p.add("w", vec![1], Init::Zeros).is_err());
    }
}
