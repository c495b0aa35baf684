//! Parameter initializers.

use rand::Rng;

use super::{Scalar, Tensor};

/// Uniform Glorot: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<T: Scalar, R: Rng>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, limit, rng)
}

pub fn uniform<T: Scalar, R: Rng>(shape: &[usize], limit: f64, rng: &mut R) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-limit..=limit))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches")
}
