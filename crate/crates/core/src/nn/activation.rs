use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Over the last axis.
    Softmax,
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn last_axis<T: Scalar>(x: &Tensor<T>) -> usize {
    x.shape().last().copied().unwrap_or(1).max(1)
}

pub fn activation<T: Scalar>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Relu => x.map(|v| v.max(T::zero())),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Softmax => {
            let mut out = x.clone();
            let width = last_axis(x);
            out.data_mut().chunks_mut(width).for_each(softmax_in_place);
            out
        }
    }
}

/// Backpropagates through an activation given its input and output.
pub fn activation_backward<T: Scalar>(
    kind: Activation,
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    grad_out.expect_shape(output.shape())?;
    let mut grad = grad_out.clone();
    match kind {
        Activation::Relu => {
            for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
                if x <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
                *g *= y * (T::one() - y);
            }
        }
        Activation::Softmax => {
            let width = last_axis(output);
            for (g, y) in grad.data_mut().chunks_mut(width).zip(output.data().chunks(width)) {
                // dx_i = y_i (g_i - sum_j g_j y_j)
                let inner: T = g.iter().zip(y).map(|(&a, &b)| a * b).sum();
                for (gi, &yi) in g.iter_mut().zip(y) {
                    *gi = yi * (*gi - inner);
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        let s = activation(&Tensor::<f64>::vector(vec![0.0]), Activation::Sigmoid);
        assert_eq!(s.data(), &[0.5]);
        let r = activation(&Tensor::<f64>::vector(vec![-1.0, 2.0]), Activation::Relu);
        assert_eq!(r.data(), &[0.0, 2.0]);
        let p = activation(&Tensor::<f64>::vector(vec![3.0; 5]), Activation::Softmax);
        for v in p.data() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_and_extremes() {
        let x = Tensor::<f64>::from_f64(&[2, 3], &[1000.0, 0.0, -1000.0, 1.0, 2.0, 3.0]).unwrap();
        let y = activation(&x, Activation::Softmax);
        for row in y.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| v.is_finite()));
        }
        let s = activation(&Tensor::<f64>::vector(vec![-800.0, 800.0]), Activation::Sigmoid);
        assert!(s.is_finite());
    }
}
