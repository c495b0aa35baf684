use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, init, Scalar, Tensor};
use crate::error::{Error, Result};

/// 1-D convolution over time, valid padding, stride 1.
///
/// `kernels` has shape `K x W x Din` (filters, window, input depth) and
/// `bias` has `K` entries. An `L x Din` input yields `(L - W + 1) x K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Conv1d<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if kernels.shape().len() != 3 || bias.shape() != [kernels.shape()[0]] {
            return Err(Error::Shape(format!("conv1d kernels {:?} / bias {:?}", kernels.shape(), bias.shape())));
        }
        Ok(Conv1d { kernels, bias })
    }

    pub fn glorot<R: Rng>(filters: usize, window: usize, in_depth: usize, rng: &mut R) -> Self {
        Conv1d {
            kernels: init::glorot_uniform(&[filters, window, in_depth], window * in_depth, window * filters, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn window(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_depth(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        (input_len >= self.window()).then(|| input_len - self.window() + 1)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<usize> {
        if input.shape().len() != 2 || input.shape()[1] != self.in_depth() {
            return Err(Error::Shape(format!("conv1d expects L x {} input, got {:?}", self.in_depth(), input.shape())));
        }
        self.output_len(input.shape()[0]).ok_or_else(|| {
            Error::Shape(format!("conv1d input length {} shorter than window {}", input.shape()[0], self.window()))
        })
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let out_len = self.check_input(input)?;
        let k = self.filters();
        let span = self.window() * self.in_depth();
        let x = input.data();
        let d = self.in_depth();
        let mut out = Vec::with_capacity(out_len * k);
        for t in 0..out_len {
            // rows t..t+W of the input are contiguous
            let patch = &x[t * d..t * d + span];
            for f in 0..k {
                out.push(self.bias.data()[f] + dot(self.kernels.row(f), patch));
            }
        }
        Tensor::matrix(out_len, k, out)
    }

    /// Returns (input gradient, kernel gradient, bias gradient).
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let out_len = self.check_input(input)?;
        let k = self.filters();
        grad_out.expect_shape(&[out_len, k])?;
        let d = self.in_depth();
        let span = self.window() * d;
        let x = input.data();

        let mut grad_in = Tensor::zeros(input.shape());
        let mut grad_k = Tensor::zeros(self.kernels.shape());
        let mut grad_b = Tensor::zeros(&[k]);
        for t in 0..out_len {
            let g = grad_out.row(t);
            let patch = &x[t * d..t * d + span];
            for f in 0..k {
                let gf = g[f];
                grad_b.data_mut()[f] += gf;
                axpy(gf, patch, grad_k.row_mut(f));
                axpy(gf, self.kernels.row(f), &mut grad_in.data_mut()[t * d..t * d + span]);
            }
        }
        Ok((grad_in, grad_k, grad_b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_kernel() {
        let conv =
            Conv1d::new(Tensor::<f64>::from_f64(&[1, 3, 1], &[1.0, 0.0, -1.0]).unwrap(), Tensor::zeros(&[1])).unwrap();
        let input = Tensor::from_f64(&[4, 1], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(conv.forward(&input).unwrap().data(), &[-2.0, -2.0]);
    }

    #[test]
    fn zero_input_zero_bias() {
        let mut rng = rand::thread_rng();
        let conv = Conv1d::<f64>::glorot(4, 3, 2, &mut rng);
        let out = conv.forward(&Tensor::zeros(&[7, 2])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_lengths() {
        let mut rng = rand::thread_rng();
        let conv = Conv1d::<f32>::glorot(32, 3, 16, &mut rng);
        let out = conv.forward(&Tensor::zeros(&[120, 16])).unwrap();
        assert_eq!(out.shape(), &[118, 32]);
    }

    #[test]
    fn too_short_input() {
        let mut rng = rand::thread_rng();
        let conv = Conv1d::<f64>::glorot(2, 3, 1, &mut rng);
        assert!(conv.forward(&Tensor::zeros(&[2, 1])).is_err());
    }
}
