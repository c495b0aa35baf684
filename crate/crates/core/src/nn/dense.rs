use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, init, Scalar, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer: `out = W x + b`, `W` shaped `Out x In`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape() != [weights.shape()[0]] {
            return Err(Error::Shape(format!("dense weights {:?} / bias {:?}", weights.shape(), bias.shape())));
        }
        Ok(Dense { weights, bias })
    }

    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            weights: init::glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    fn check(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != [self.inputs()] {
            return Err(Error::Shape(format!("dense expects [{}] input, got {:?}", self.inputs(), input.shape())));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(input)?;
        let out = (0..self.outputs()).map(|j| self.bias.data()[j] + dot(self.weights.row(j), input.data())).collect();
        Ok(Tensor::vector(out))
    }

    /// Returns (input gradient, weight gradient, bias gradient).
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        self.check(input)?;
        grad_out.expect_shape(&[self.outputs()])?;
        let mut grad_in = Tensor::zeros(&[self.inputs()]);
        let mut grad_w = Tensor::zeros(self.weights.shape());
        for (j, &g) in grad_out.data().iter().enumerate() {
            axpy(g, input.data(), grad_w.row_mut(j));
            axpy(g, self.weights.row(j), grad_in.data_mut());
        }
        Ok((grad_in, grad_w, grad_out.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_dot_product() {
        let d =
            Dense::new(Tensor::<f64>::from_f64(&[1, 2], &[1.0, 2.0]).unwrap(), Tensor::from_f64(&[1], &[3.0]).unwrap())
                .unwrap();
        let out = d.forward(&Tensor::vector(vec![4.0, 5.0])).unwrap();
        assert_eq!(out.data(), &[17.0]);
    }

    #[test]
    fn identity_and_zero_input() {
        let d =
            Dense::new(Tensor::<f64>::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap(), Tensor::zeros(&[2])).unwrap();
        assert_eq!(d.forward(&Tensor::vector(vec![-3.0, 7.5])).unwrap().data(), &[-3.0, 7.5]);

        let b = Dense::new(Tensor::<f64>::filled(&[2, 3], 0.7), Tensor::vector(vec![0.25, -1.0])).unwrap();
        assert_eq!(b.forward(&Tensor::zeros(&[3])).unwrap().data(), &[0.25, -1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let d = Dense::<f64>::glorot(3, 2, &mut rand::thread_rng());
        assert!(d.forward(&Tensor::zeros(&[4])).is_err());
    }
}
