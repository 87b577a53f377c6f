//! Localization and domain-classification losses.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probability clamp applied before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean of squared element-wise differences.
pub fn mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    target.expect_shape(pred.shape(), "mse target")?;
    Ok(mse_slices(pred.data(), target.data()))
}

pub(crate) fn mse_slices<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let n = T::from_usize(pred.len()).unwrap_or_else(T::one);
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        / n
}

/// Binary cross-entropy of probabilities `p` against one shared label.
pub fn bce<T: Scalar>(p: &Tensor<T>, target: T) -> T {
    let targets = vec![target; p.len()];
    bce_slices(p.data(), &targets)
}

/// Binary cross-entropy against per-element labels.
pub fn bce_per_element<T: Scalar>(p: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    target.expect_shape(p.shape(), "bce target")?;
    Ok(bce_slices(p.data(), target.data()))
}

pub(crate) fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::from_f64_lossy(BCE_EPSILON);
    p.max(eps).min(T::one() - eps)
}

pub(crate) fn bce_slices<T: Scalar>(p: &[T], target: &[T]) -> T {
    let n = T::from_usize(p.len()).unwrap_or_else(T::one);
    p.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let c = clamp_prob(p);
            -(t * c.ln() + (T::one() - t) * (T::one() - c).ln())
        })
        .sum::<T>()
        / n
}

/// d bce / d p for one element, zero inside the clamped region.
pub(crate) fn bce_grad<T: Scalar>(p: T, t: T, n: usize) -> T {
    let c = clamp_prob(p);
    if c != p {
        return T::zero();
    }
    let n = T::from_usize(n).unwrap_or_else(T::one);
    (-(t / c) + (T::one() - t) / (T::one() - c)) / n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(vec![v.len()], v).unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&t(&[0.3, -1.0]), &t(&[0.3, -1.0])).unwrap(), 0.0);
        assert_eq!(mse(&t(&[1.0, 1.0]), &t(&[0.0, 0.0])).unwrap(), 1.0);
        assert!(mse(&t(&[1.0]), &t(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn mse_matches_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..97).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..97).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut acc = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            acc += d * d;
        }
        let oracle = acc / a.len() as f64;
        assert!((mse(&t(&a), &t(&b)).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn bce_examples() {
        assert!((bce(&t(&[0.5]), 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce(&t(&[1.0 - 1e-7]), 1.0) < 1e-6);
        assert!((bce(&t(&[0.9]), 0.0) - std::f64::consts::LN_10).abs() < 1e-6);
        // clamp keeps log finite
        assert!(bce(&t(&[0.0]), 1.0).is_finite());
        assert!(bce(&t(&[1.0]), 0.0).is_finite());
    }
}
