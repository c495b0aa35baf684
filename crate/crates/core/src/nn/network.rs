use serde::{Deserialize, Serialize};

use super::{
    activation, activation_backward, global_avg_pool, global_avg_pool_backward, loss, loss_gradient, Activation,
    Conv1d, Dense, LossKind, Lstm, LstmCache, Mode, Scalar, Tensor,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "type", rename_all = "snake_case")]
pub enum Layer<T> {
    Conv1d(Conv1d<T>),
    Lstm(Lstm<T>),
    GlobalAvgPool,
    Dense(Dense<T>),
    Activation { kind: Activation },
}

impl<T: Scalar> Layer<T> {
    pub fn activation(kind: Activation) -> Self {
        Layer::Activation { kind }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv1d(c) => vec![&c.kernels, &c.bias],
            Layer::Lstm(l) => vec![&l.input_weights, &l.recurrent_weights, &l.bias],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            Layer::GlobalAvgPool | Layer::Activation { .. } => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv1d(c) => vec![&mut c.kernels, &mut c.bias],
            Layer::Lstm(l) => vec![&mut l.input_weights, &mut l.recurrent_weights, &mut l.bias],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            Layer::GlobalAvgPool | Layer::Activation { .. } => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "conv1d",
            Layer::Lstm(_) => "lstm",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::Dense(_) => "dense",
            Layer::Activation { kind: Activation::Relu } => "relu",
            Layer::Activation { kind: Activation::Sigmoid } => "sigmoid",
            Layer::Activation { kind: Activation::Softmax } => "softmax",
        }
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self {
            Layer::Conv1d(_) => &["kernels", "bias"],
            Layer::Lstm(_) => &["input_weights", "recurrent_weights", "bias"],
            Layer::Dense(_) => &["weights", "bias"],
            Layer::GlobalAvgPool | Layer::Activation { .. } => &[],
        }
    }
}

enum Cache<T> {
    Input(Tensor<T>),
    Lstm(LstmCache<T>),
    Shape(Vec<usize>),
    Activation { input: Tensor<T>, output: Tensor<T> },
}

/// Result of a forward + backward pass.
#[derive(Debug, Clone)]
pub struct Backward<T> {
    pub loss: T,
    pub output: Tensor<T>,
    /// One tensor per parameter, in [`Network::params`] order.
    pub param_grads: Vec<Tensor<T>>,
    pub input_grad: Tensor<T>,
}

/// A stack of layers applied in order, trained against `loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
    pub loss: LossKind,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>, loss: LossKind) -> Self {
        Network { layers, loss }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// `"<index>.<layer>.<param>"` for every parameter.
    pub fn param_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.param_names().iter().map(move |p| format!("{i}.{}.{p}", l.name())))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv1d(c) => Layer::Conv1d(Conv1d { kernels: c.kernels.cast(), bias: c.bias.cast() }),
                Layer::Lstm(l) => Layer::Lstm(Lstm {
                    input_weights: l.input_weights.cast(),
                    recurrent_weights: l.recurrent_weights.cast(),
                    bias: l.bias.cast(),
                    dropout: l.dropout,
                }),
                Layer::Dense(d) => Layer::Dense(Dense { weights: d.weights.cast(), bias: d.bias.cast() }),
                Layer::GlobalAvgPool => Layer::GlobalAvgPool,
                Layer::Activation { kind } => Layer::Activation { kind: *kind },
            })
            .collect();
        Network { layers, loss: self.loss }
    }

    pub fn forward(&self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = match layer {
                Layer::Conv1d(c) => c.forward(&x)?,
                Layer::Lstm(l) => l.forward(&x, mode.derive(i as u64))?,
                Layer::GlobalAvgPool => global_avg_pool(&x)?,
                Layer::Dense(d) => d.forward(&x)?,
                Layer::Activation { kind } => activation(&x, *kind),
            };
        }
        Ok(x)
    }

    fn forward_cached(&self, input: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache) = match layer {
                Layer::Conv1d(c) => (c.forward(&x)?, Cache::Input(x)),
                Layer::Lstm(l) => {
                    let (y, cache) = l.forward_cached(&x, mode.derive(i as u64))?;
                    (y, Cache::Lstm(cache))
                }
                Layer::GlobalAvgPool => (global_avg_pool(&x)?, Cache::Shape(x.shape().to_vec())),
                Layer::Dense(d) => (d.forward(&x)?, Cache::Input(x)),
                Layer::Activation { kind } => {
                    let y = activation(&x, *kind);
                    (y.clone(), Cache::Activation { input: x, output: y })
                }
            };
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Sign pattern of every ReLU input; a change between two parameter
    /// settings means a kink was crossed.
    pub fn relu_pattern(&self, input: &Tensor<T>, mode: Mode) -> Result<Vec<bool>> {
        let (_, caches) = self.forward_cached(input, mode)?;
        let mut pattern = Vec::new();
        for (layer, cache) in self.layers.iter().zip(&caches) {
            if let (Layer::Activation { kind: Activation::Relu }, Cache::Activation { input, .. }) = (layer, cache) {
                pattern.extend(input.data().iter().map(|&v| v > T::zero()));
            }
        }
        Ok(pattern)
    }

    pub fn loss_value(&self, input: &Tensor<T>, target: &Tensor<T>, mode: Mode) -> Result<T> {
        loss(&self.forward(input, mode)?, target, self.loss)
    }

    /// Exact gradients of the loss with respect to every parameter and the
    /// input.
    ///
    /// When the stack ends in sigmoid (binary) or softmax (categorical), the
    /// two are differentiated together, giving `p - y` at the logits. That
    /// is the gradient of the unclamped cross-entropy and stays informative
    /// when the output saturates.
    pub fn backward(&self, input: &Tensor<T>, target: &Tensor<T>, mode: Mode) -> Result<Backward<T>> {
        let (output, caches) = self.forward_cached(input, mode)?;
        let loss_value = loss(&output, target, self.loss)?;

        let fused = matches!(
            (self.layers.last(), self.loss),
            (Some(Layer::Activation { kind: Activation::Sigmoid }), LossKind::BinaryCe)
                | (Some(Layer::Activation { kind: Activation::Softmax }), LossKind::CategoricalCe)
        );
        let (mut grad, stop) = if fused {
            let rows = match self.loss {
                LossKind::BinaryCe => output.len(),
                LossKind::CategoricalCe => output.len() / output.shape().last().copied().unwrap_or(1).max(1),
            };
            let inv = T::one() / T::of(rows as f64);
            let mut g = output.clone();
            for (gi, &y) in g.data_mut().iter_mut().zip(target.data()) {
                *gi = (*gi - y) * inv;
            }
            (g, self.layers.len() - 1)
        } else {
            (loss_gradient(&output, target, self.loss)?, self.layers.len())
        };

        let mut per_layer: Vec<Vec<Tensor<T>>> = vec![Vec::new(); self.layers.len()];
        for idx in (0..stop).rev() {
            let layer = &self.layers[idx];
            grad = match (layer, &caches[idx]) {
                (Layer::Conv1d(c), Cache::Input(x)) => {
                    let (gi, gk, gb) = c.backward(x, &grad)?;
                    per_layer[idx] = vec![gk, gb];
                    gi
                }
                (Layer::Lstm(l), Cache::Lstm(cache)) => {
                    let (gi, [gw, gu, gb]) = l.backward(cache, &grad)?;
                    per_layer[idx] = vec![gw, gu, gb];
                    gi
                }
                (Layer::GlobalAvgPool, Cache::Shape(shape)) => global_avg_pool_backward(shape, &grad)?,
                (Layer::Dense(d), Cache::Input(x)) => {
                    let (gi, gw, gb) = d.backward(x, &grad)?;
                    per_layer[idx] = vec![gw, gb];
                    gi
                }
                (Layer::Activation { kind }, Cache::Activation { input, output }) => {
                    activation_backward(*kind, input, output, &grad)?
                }
                _ => return Err(Error::Shape(format!("cache mismatch at layer {idx}"))),
            };
        }
        Ok(Backward {
            loss: loss_value,
            output,
            param_grads: per_layer.into_iter().flatten().collect(),
            input_grad: grad,
        })
    }
}
