use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean over the time axis: `T x H -> H`.
pub fn global_avg_pool<T: Scalar>(sequence: &Tensor<T>) -> Result<Tensor<T>> {
    let (steps, width) = check(sequence)?;
    let mut out = vec![T::zero(); width];
    for t in 0..steps {
        for (o, &v) in out.iter_mut().zip(sequence.row(t)) {
            *o += v;
        }
    }
    let inv = T::one() / T::of(steps as f64);
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(Tensor::vector(out))
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (steps, width) = (input_shape[0], input_shape[1]);
    grad_out.expect_shape(&[width])?;
    let inv = T::one() / T::of(steps as f64);
    let mut grad = Tensor::zeros(input_shape);
    for t in 0..steps {
        for (g, &go) in grad.row_mut(t).iter_mut().zip(grad_out.data()) {
            *g = go * inv;
        }
    }
    Ok(grad)
}

fn check<T: Scalar>(sequence: &Tensor<T>) -> Result<(usize, usize)> {
    match sequence.shape() {
        [steps, width] if *steps >= 1 => Ok((*steps, *width)),
        other => Err(Error::Shape(format!("global average pooling needs T x H with T >= 1, got {other:?}"))),
    }
}
