use crate::error::{GradError, Result};
use crate::exec::Gradients;
use crate::param::{ParamId, ParamSet};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.5, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Bias-corrected Adam moments for one group of parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    ids: Vec<ParamId>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, ids: Vec<ParamId>, config: AdamConfig) -> Self {
        let m: Vec<_> = ids.iter().map(|&id| Tensor::zeros(params.get(id).shape().to_vec())).collect();
        Self { config, v: m.clone(), m, ids, t: 0 }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update of every parameter in the group; missing gradients count
    /// as zero.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Gradients<T>) -> Result<()> {
        for (k, &id) in self.ids.iter().enumerate() {
            if let Some(g) = grads.param(id) {
                g.expect_shape(params.get(id).shape(), params.name(id))?;
            }
            if self.m[k].shape() != params.get(id).shape() {
                return Err(GradError::ShapeMismatch {
                    context: format!("adam moments for {}", params.name(id)),
                    expected: params.get(id).shape().to_vec(),
                    actual: self.m[k].shape().to_vec(),
                });
            }
        }
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.epsilon);
        let t = self.t as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        for (k, &id) in self.ids.iter().enumerate() {
            let g = grads.param(id);
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            let p = params.get_mut(id).data_mut();
            for j in 0..p.len() {
                let gj = g.map_or(T::zero(), |g| g.data()[j]);
                m[j] = b1 * m[j] + (T::one() - b1) * gj;
                v[j] = b2 * v[j] + (T::one() - b2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn grads(entries: &[(ParamId, Tensor<f64>)]) -> Gradients<f64> {
        Gradients { params: entries.iter().cloned().collect::<BTreeMap<_, _>>(), inputs: vec![] }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ParamSet::<f64>::new(0);
        let id = p.insert("w", Tensor::from_f64(vec![2], &[0.3, -0.7]).unwrap()).unwrap();
        let before = p.get(id).clone();
        let mut s = AdamState::new(&p, vec![id], AdamConfig::default());
        s.step(&mut p, &grads(&[(id, Tensor::zeros(vec![2]))])).unwrap();
        assert_eq!(p.get(id), &before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // m = 0.5, v = 0.001; bias correction gives m_hat = v_hat = 1.
        let mut p = ParamSet::<f64>::new(0);
        let id = p.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut s = AdamState::new(&p, vec![id], AdamConfig::default());
        s.step(&mut p, &grads(&[(id, Tensor::scalar(1.0))])).unwrap();
        let expect = 1.0 - 1e-4 / (1.0 + 1e-8);
        assert!((p.get(id).data()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn identical_params_get_identical_updates() {
        let mut p = ParamSet::<f32>::new(0);
        let a = p.insert("a", Tensor::scalar(0.5)).unwrap();
        let b = p.insert("b", Tensor::scalar(0.5)).unwrap();
        let mut s = AdamState::new(&p, vec![a, b], AdamConfig::default());
        let g = Gradients {
            params: [(a, Tensor::scalar(0.25f32)), (b, Tensor::scalar(0.25f32))].into_iter().collect(),
            inputs: vec![],
        };
        for _ in 0..5 {
            s.step(&mut p, &g).unwrap();
        }
        assert_eq!(p.get(a).data()[0].to_bits(), p.get(b).data()[0].to_bits());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = ParamSet::<f64>::new(0);
        let id = p.insert("w", Tensor::zeros(vec![3])).unwrap();
        let mut s = AdamState::new(&p, vec![id], AdamConfig::default());
        assert!(s.step(&mut p, &grads(&[(id, Tensor::zeros(vec![2]))])).is_err());
    }
}
