//! LSTM layer returning the full hidden-state sequence.
//!
//! The four gates are stacked in one matrix in the order input, forget,
//! cell candidate, output:
//!
//! ```text
//! z = W x~ + U h~ + b            (4H)
//! i = sig(z[0..H])   f = sig(z[H..2H])   g = tanh(z[2H..3H])   o = sig(z[3H..4H])
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! In training mode `x~ = x * mx` and `h~ = h_{t-1} * mh`, where the two
//! dropout masks are drawn once per sequence, reused at every step and
//! scaled by `1 / (1 - rate)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::{axpy, dot, init, Mode, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub recurrent_rate: f64,
}

impl DropoutSpec {
    pub const NONE: DropoutSpec = DropoutSpec { rate: 0.0, recurrent_rate: 0.0 };

    pub fn validate(&self) -> Result<()> {
        for r in [self.rate, self.recurrent_rate] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidArgument(format!("dropout rate {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

impl Default for DropoutSpec {
    fn default() -> Self {
        DropoutSpec { rate: 0.2, recurrent_rate: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Lstm<T> {
    /// Input weights, `4H x Din`.
    pub input_weights: Tensor<T>,
    /// Recurrent weights, `4H x H`.
    pub recurrent_weights: Tensor<T>,
    /// `4H`
    pub bias: Tensor<T>,
    pub dropout: DropoutSpec,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    steps: usize,
    /// Masked inputs, `T x Din`.
    inputs: Vec<T>,
    /// Masked previous hidden states, `T x H`.
    prev_hidden: Vec<T>,
    /// Activated gates, `T x 4H`.
    gates: Vec<T>,
    /// Cell states, `T x H`.
    cells: Vec<T>,
    /// tanh of the cell states, `T x H`.
    cells_tanh: Vec<T>,
    input_mask: Option<Vec<T>>,
    hidden_mask: Option<Vec<T>>,
}

fn dropout_mask<T: Scalar, R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect()
}

impl<T: Scalar> Lstm<T> {
    /// Glorot-uniform input and recurrent weights, zero biases except the
    /// forget gate, which starts at 1.
    pub fn glorot<R: Rng>(in_depth: usize, units: usize, dropout: DropoutSpec, rng: &mut R) -> Self {
        let mut bias = Tensor::zeros(&[4 * units]);
        bias.data_mut()[units..2 * units].iter_mut().for_each(|b| *b = T::one());
        Lstm {
            input_weights: init::glorot_uniform(&[4 * units, in_depth], in_depth, 4 * units, rng),
            recurrent_weights: init::glorot_uniform(&[4 * units, units], units, 4 * units, rng),
            bias,
            dropout,
        }
    }

    pub fn new(
        input_weights: Tensor<T>,
        recurrent_weights: Tensor<T>,
        bias: Tensor<T>,
        dropout: DropoutSpec,
    ) -> Result<Self> {
        let rows = bias.len();
        let ok = rows % 4 == 0
            && input_weights.shape().len() == 2
            && input_weights.shape()[0] == rows
            && recurrent_weights.shape() == [rows, rows / 4]
            && bias.shape() == [rows];
        if !ok {
            return Err(Error::Shape(format!(
                "lstm W {:?}, U {:?}, b {:?}",
                input_weights.shape(),
                recurrent_weights.shape(),
                bias.shape()
            )));
        }
        dropout.validate()?;
        Ok(Lstm { input_weights, recurrent_weights, bias, dropout })
    }

    pub fn units(&self) -> usize {
        self.recurrent_weights.shape()[1]
    }

    pub fn in_depth(&self) -> usize {
        self.input_weights.shape()[1]
    }

    pub fn forward(&self, sequence: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_cached(sequence, mode).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, sequence: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, LstmCache<T>)> {
        let d = self.in_depth();
        let h = self.units();
        let steps = match sequence.shape() {
            [t, din] if *din == d && *t >= 1 => *t,
            other => {
                return Err(Error::Shape(format!("lstm expects T x {d} input with T >= 1, got {other:?}")));
            }
        };

        let (input_mask, hidden_mask) = if mode.training {
            let mut rng = ChaCha8Rng::seed_from_u64(mode.seed);
            let mx = (self.dropout.rate > 0.0).then(|| dropout_mask(d, self.dropout.rate, &mut rng));
            let mh =
                (self.dropout.recurrent_rate > 0.0).then(|| dropout_mask(h, self.dropout.recurrent_rate, &mut rng));
            (mx, mh)
        } else {
            (None, None)
        };

        let mut cache = LstmCache {
            steps,
            inputs: Vec::with_capacity(steps * d),
            prev_hidden: Vec::with_capacity(steps * h),
            gates: vec![T::zero(); steps * 4 * h],
            cells: vec![T::zero(); steps * h],
            cells_tanh: vec![T::zero(); steps * h],
            input_mask,
            hidden_mask,
        };
        let mut out = vec![T::zero(); steps * h];
        let mut hidden = vec![T::zero(); h];
        let mut cell = vec![T::zero(); h];
        let mut x_t = vec![T::zero(); d];
        let mut h_t = vec![T::zero(); h];

        for t in 0..steps {
            x_t.copy_from_slice(sequence.row(t));
            if let Some(m) = &cache.input_mask {
                x_t.iter_mut().zip(m).for_each(|(x, &m)| *x *= m);
            }
            h_t.copy_from_slice(&hidden);
            if let Some(m) = &cache.hidden_mask {
                h_t.iter_mut().zip(m).for_each(|(x, &m)| *x *= m);
            }

            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            for (r, z) in gates.iter_mut().enumerate() {
                let pre = self.bias.data()[r]
                    + dot(self.input_weights.row(r), &x_t)
                    + dot(self.recurrent_weights.row(r), &h_t);
                *z = if (2 * h..3 * h).contains(&r) { pre.tanh() } else { sigmoid(pre) };
            }
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                cell[j] = f * cell[j] + i * g;
                let tc = cell[j].tanh();
                hidden[j] = o * tc;
                cache.cells[t * h + j] = cell[j];
                cache.cells_tanh[t * h + j] = tc;
            }
            out[t * h..(t + 1) * h].copy_from_slice(&hidden);
            cache.inputs.extend_from_slice(&x_t);
            cache.prev_hidden.extend_from_slice(&h_t);
        }
        Ok((Tensor::matrix(steps, h, out)?, cache))
    }

    /// Backpropagation through time over all steps. Returns the input
    /// gradient and the gradients of `(W, U, b)`.
    pub fn backward(&self, cache: &LstmCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, [Tensor<T>; 3])> {
        let d = self.in_depth();
        let h = self.units();
        let steps = cache.steps;
        grad_out.expect_shape(&[steps, h])?;

        let mut grad_w = Tensor::zeros(self.input_weights.shape());
        let mut grad_u = Tensor::zeros(self.recurrent_weights.shape());
        let mut grad_b = Tensor::zeros(self.bias.shape());
        let mut grad_in = Tensor::zeros(&[steps, d]);

        let mut dh_next = vec![T::zero(); h];
        let mut dc_next = vec![T::zero(); h];
        let mut dz = vec![T::zero(); 4 * h];
        let mut dx = vec![T::zero(); d];
        let mut dh_prev = vec![T::zero(); h];
        let one = T::one();

        for t in (0..steps).rev() {
            let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let go = grad_out.row(t);
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = cache.cells_tanh[t * h + j];
                let c_prev = if t > 0 { cache.cells[(t - 1) * h + j] } else { T::zero() };
                let dh = go[j] + dh_next[j];
                let dc = dh * o * (one - tc * tc) + dc_next[j];
                dz[j] = dc * g * i * (one - i);
                dz[h + j] = dc * c_prev * f * (one - f);
                dz[2 * h + j] = dc * i * (one - g * g);
                dz[3 * h + j] = dh * tc * o * (one - o);
                dc_next[j] = dc * f;
            }

            let x_t = &cache.inputs[t * d..(t + 1) * d];
            let h_t = &cache.prev_hidden[t * h..(t + 1) * h];
            dx.iter_mut().for_each(|v| *v = T::zero());
            dh_prev.iter_mut().for_each(|v| *v = T::zero());
            for (r, &g) in dz.iter().enumerate() {
                grad_b.data_mut()[r] += g;
                axpy(g, x_t, grad_w.row_mut(r));
                axpy(g, h_t, grad_u.row_mut(r));
                axpy(g, self.input_weights.row(r), &mut dx);
                axpy(g, self.recurrent_weights.row(r), &mut dh_prev);
            }
            if let Some(m) = &cache.input_mask {
                dx.iter_mut().zip(m).for_each(|(v, &m)| *v *= m);
            }
            grad_in.row_mut(t).copy_from_slice(&dx);
            if let Some(m) = &cache.hidden_mask {
                dh_prev.iter_mut().zip(m).for_each(|(v, &m)| *v *= m);
            }
            dh_next.copy_from_slice(&dh_prev);
        }
        Ok((grad_in, [grad_w, grad_u, grad_b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_everything_gives_zero_output() {
        let lstm =
            Lstm::<f64>::new(Tensor::zeros(&[12, 2]), Tensor::zeros(&[12, 3]), Tensor::zeros(&[12]), DropoutSpec::NONE)
                .unwrap();
        let out = lstm.forward(&Tensor::zeros(&[5, 2]), Mode::inference()).unwrap();
        assert_eq!(out.shape(), &[5, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_matches_hand_unrolled_gates() {
        // H = Din = 1; only b_i, b_o and W_g are non-zero.
        let (bi, bo, wg, x) = (4.0_f64, 5.0, 0.7, 1.3);
        let w = Tensor::<f64>::from_f64(&[4, 1], &[0.0, 0.0, wg, 0.0]).unwrap();
        let b = Tensor::from_f64(&[4], &[bi, 0.0, 0.0, bo]).unwrap();
        let lstm = Lstm::new(w, Tensor::zeros(&[4, 1]), b, DropoutSpec::NONE).unwrap();
        let out = lstm.forward(&Tensor::from_f64(&[1, 1], &[x]).unwrap(), Mode::inference()).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(bi);
        let f = sig(0.0);
        let g = (wg * x).tanh();
        let o = sig(bo);
        let c = f * 0.0 + i * g;
        let expected = o * c.tanh();
        assert!((out.data()[0] - expected).abs() < 1e-10);
    }

    #[test]
    fn inference_ignores_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lstm = Lstm::<f64>::glorot(2, 4, DropoutSpec::default(), &mut rng);
        let x = init::uniform(&[6, 2], 1.0, &mut rng);
        let a = lstm.forward(&x, Mode { training: false, seed: 1 }).unwrap();
        let b = lstm.forward(&x, Mode { training: false, seed: 99 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_masks_depend_on_seed_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lstm = Lstm::<f64>::glorot(3, 5, DropoutSpec { rate: 0.5, recurrent_rate: 0.5 }, &mut rng);
        let x = init::uniform(&[4, 3], 1.0, &mut rng);
        let a = lstm.forward(&x, Mode::training(10)).unwrap();
        let b = lstm.forward(&x, Mode::training(10)).unwrap();
        let c = lstm.forward(&x, Mode::training(11)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let lstm = Lstm::<f32>::glorot(16, 100, DropoutSpec::default(), &mut rand::thread_rng());
        let b = lstm.bias.data();
        assert!(b[100..200].iter().all(|&v| v == 1.0));
        assert!(b[..100].iter().chain(&b[200..]).all(|&v| v == 0.0));
    }
}
