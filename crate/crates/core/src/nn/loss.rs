use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BinaryCe,
    CategoricalCe,
}

fn clamp<T: Scalar>(p: T) -> T {
    let lo = T::of(PROB_CLAMP);
    p.max(lo).min(T::one() - lo)
}

/// Cross-entropy of `prediction` against `target`.
///
/// Binary: mean of `-[y ln p + (1-y) ln(1-p)]` over elements. Categorical:
/// `-sum y_c ln p_c` per row of the last axis, averaged over rows.
pub fn loss<T: Scalar>(prediction: &Tensor<T>, target: &Tensor<T>, kind: LossKind) -> Result<T> {
    check(prediction, target)?;
    let p = prediction.data();
    let y = target.data();
    match kind {
        LossKind::BinaryCe => {
            let total: T = p
                .iter()
                .zip(y)
                .map(|(&p, &y)| {
                    let p = clamp(p);
                    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
                })
                .sum();
            Ok(total / T::of(p.len() as f64))
        }
        LossKind::CategoricalCe => {
            let rows = prediction.len() / last_axis(prediction);
            let total: T = p.iter().zip(y).map(|(&p, &y)| -y * clamp(p).ln()).sum();
            Ok(total / T::of(rows as f64))
        }
    }
}

/// Derivative of [`loss`] with respect to the prediction. Clamped
/// coordinates have zero derivative.
pub fn loss_gradient<T: Scalar>(prediction: &Tensor<T>, target: &Tensor<T>, kind: LossKind) -> Result<Tensor<T>> {
    check(prediction, target)?;
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    let inside = |p: T| p > lo && p < hi;
    let mut grad = Tensor::zeros(prediction.shape());
    match kind {
        LossKind::BinaryCe => {
            let n = T::of(prediction.len() as f64);
            for ((g, &p), &y) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
                if inside(p) {
                    *g = (-y / p + (T::one() - y) / (T::one() - p)) / n;
                }
            }
        }
        LossKind::CategoricalCe => {
            let rows = T::of((prediction.len() / last_axis(prediction)) as f64);
            for ((g, &p), &y) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
                if inside(p) {
                    *g = -y / p / rows;
                }
            }
        }
    }
    Ok(grad)
}

fn last_axis<T: Scalar>(x: &Tensor<T>) -> usize {
    x.shape().last().copied().unwrap_or(1).max(1)
}

fn check<T: Scalar>(prediction: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", prediction.shape(), target.shape())));
    }
    if prediction.is_empty() {
        return Err(Error::Shape("empty prediction".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::vector(v.to_vec())
    }

    #[test]
    fn analytic_values() {
        let l = loss(&t(&[0.5]), &t(&[1.0]), LossKind::BinaryCe).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);

        let l = loss(&t(&[0.0, 1.0, 0.0]), &t(&[0.0, 1.0, 0.0]), LossKind::CategoricalCe).unwrap();
        assert!(l >= 0.0 && l < 1e-6);

        let l = loss(&t(&[0.2; 5]), &t(&[0.0, 0.0, 1.0, 0.0, 0.0]), LossKind::CategoricalCe).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        assert!(loss(&t(&[0.5, 0.5]), &t(&[1.0]), LossKind::BinaryCe).is_err());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let p = t(&[0.3, 0.6, 0.1]);
        let y = t(&[0.0, 1.0, 0.0]);
        for kind in [LossKind::BinaryCe, LossKind::CategoricalCe] {
            let g = loss_gradient(&p, &y, kind).unwrap();
            for i in 0..3 {
                let h = 1e-6;
                let mut up = p.clone();
                up.data_mut()[i] += h;
                let mut dn = p.clone();
                dn.data_mut()[i] -= h;
                let fd = (loss(&up, &y, kind).unwrap() - loss(&dn, &y, kind).unwrap()) / (2.0 * h);
                assert!((fd - g.data()[i]).abs() < 1e-6, "{kind:?} {i}: {fd} vs {}", g.data()[i]);
            }
        }
    }
}
