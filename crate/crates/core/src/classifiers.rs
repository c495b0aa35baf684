//! The embedding + Conv1D + LSTM classifier in its binary and five-class
//! forms, its training loop, and prediction.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinaryLabel, ClassLabel};
use crate::error::{Error, Result};
use crate::nn::gradcheck::GradientCheckable;
use crate::nn::mix_seed;
use crate::nn::{
    init, Activation, AdamState, Conv1d, Dense, DropoutSpec, Layer, LossKind, Lstm, Mode, Network, Scalar, Tensor,
};
use crate::text::{TokenSequence, DEFAULT_CAPACITY, DEFAULT_MAX_LEN};
use crate::word2vec::EmbeddingMatrix;

/// Output head of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One sigmoid unit, bully vs. not bully.
    Binary,
    /// Five softmax units, one per [`ClassLabel`].
    Multiclass,
}

impl Head {
    pub fn width(self) -> usize {
        match self {
            Head::Binary => 1,
            Head::Multiclass => ClassLabel::COUNT,
        }
    }

    /// Number of distinct labels the head predicts.
    pub fn classes(self) -> usize {
        match self {
            Head::Binary => 2,
            Head::Multiclass => ClassLabel::COUNT,
        }
    }

    fn loss(self) -> LossKind {
        match self {
            Head::Binary => LossKind::BinaryCe,
            Head::Multiclass => LossKind::CategoricalCe,
        }
    }

    fn activation(self) -> Activation {
        match self {
            Head::Binary => Activation::Sigmoid,
            Head::Multiclass => Activation::Softmax,
        }
    }

    fn target<T: Scalar>(self, label: usize) -> Tensor<T> {
        match self {
            Head::Binary => Tensor::vector(vec![T::of(label as f64)]),
            Head::Multiclass => {
                let mut t = Tensor::zeros(&[ClassLabel::COUNT]);
                t.data_mut()[label] = T::one();
                t
            }
        }
    }

    fn decide<T: Scalar>(self, output: &[T]) -> usize {
        match self {
            Head::Binary => binary_decision(output[0].as_f64()).code(),
            Head::Multiclass => argmax(output.iter().map(|v| v.as_f64())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingInit {
    Word2vec,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub max_len: usize,
    pub vocab_capacity: usize,
    pub embed_dim: usize,
    pub conv_filters: usize,
    pub conv_window: usize,
    pub lstm_units: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub hidden_units: usize,
    pub head: Head,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub embedding_init: EmbeddingInit,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_len: DEFAULT_MAX_LEN,
            vocab_capacity: DEFAULT_CAPACITY,
            embed_dim: 16,
            conv_filters: 32,
            conv_window: 3,
            lstm_units: 100,
            dropout: 0.2,
            recurrent_dropout: 0.2,
            hidden_units: 64,
            head: Head::Binary,
            epochs: 15,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 42,
            embedding_init: EmbeddingInit::Word2vec,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn binary() -> Self {
        ModelConfig::default()
    }

    pub fn multiclass() -> Self {
        ModelConfig { head: Head::Multiclass, ..ModelConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_len", self.max_len),
            ("vocab_capacity", self.vocab_capacity),
            ("embed_dim", self.embed_dim),
            ("conv_filters", self.conv_filters),
            ("conv_window", self.conv_window),
            ("lstm_units", self.lstm_units),
            ("hidden_units", self.hidden_units),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if self.conv_window > self.max_len {
            return Err(Error::InvalidArgument(format!(
                "conv_window {} exceeds max_len {}",
                self.conv_window, self.max_len
            )));
        }
        if self.vocab_capacity < 3 {
            return Err(Error::InvalidArgument("vocab_capacity must be >= 3".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        DropoutSpec { rate: self.dropout, recurrent_rate: self.recurrent_dropout }.validate()
    }
}

/// Parameters of one classifier: an embedding table followed by the layer
/// stack. The vocabulary fingerprint ties the model to the vocabulary its
/// input indices come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Model<T = f32> {
    pub config: ModelConfig,
    pub embedding: Tensor<T>,
    pub network: Network<T>,
    pub vocab_fingerprint: Option<String>,
}

pub fn build_binary_model(config: &ModelConfig, emb: Option<&EmbeddingMatrix>) -> Result<Model> {
    if config.head != Head::Binary {
        return Err(Error::InvalidArgument("build_binary_model needs a binary head".into()));
    }
    Model::build(config, emb)
}

pub fn build_multiclass_model(config: &ModelConfig, emb: Option<&EmbeddingMatrix>) -> Result<Model> {
    if config.head != Head::Multiclass {
        return Err(Error::InvalidArgument("build_multiclass_model needs a multiclass head".into()));
    }
    Model::build(config, emb)
}

const MODEL_FORMAT: &str = "bangla-bully/model";

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model<T>,
}

impl<T: Scalar> Model<T> {
    /// Embedding, conv(relu), LSTM, average pooling, dense(relu) and the
    /// head. Embedding rows are copied from `emb` when given, otherwise
    /// drawn uniformly from `(-0.05, 0.05)`.
    pub fn build(config: &ModelConfig, emb: Option<&EmbeddingMatrix>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (v, d) = (config.vocab_capacity, config.embed_dim);
        let embedding = match emb {
            Some(e) => {
                if e.vocab_size() != v || e.dim() != d {
                    return Err(Error::ArtifactMismatch(format!(
                        "embedding matrix is {}x{}, config expects {v}x{d}",
                        e.vocab_size(),
                        e.dim()
                    )));
                }
                Tensor::new(vec![v, d], e.as_slice().iter().map(|&x| T::of(x)).collect())?
            }
            None => init::uniform(&[v, d], 0.05, &mut rng),
        };
        let dropout = DropoutSpec { rate: config.dropout, recurrent_rate: config.recurrent_dropout };
        let head = config.head;
        let layers = vec![
            Layer::Conv1d(Conv1d::glorot(config.conv_filters, config.conv_window, d, &mut rng)),
            Layer::activation(Activation::Relu),
            Layer::Lstm(Lstm::glorot(config.conv_filters, config.lstm_units, dropout, &mut rng)),
            Layer::GlobalAvgPool,
            Layer::Dense(Dense::glorot(config.lstm_units, config.hidden_units, &mut rng)),
            Layer::activation(Activation::Relu),
            Layer::Dense(Dense::glorot(config.hidden_units, head.width(), &mut rng)),
            Layer::activation(head.activation()),
        ];
        Ok(Model { config: *config, embedding, network: Network::new(layers, head.loss()), vocab_fingerprint: None })
    }

    pub fn head(&self) -> Head {
        self.config.head
    }

    pub fn output_width(&self) -> usize {
        self.config.head.width()
    }

    /// Trainable scalars, embedding table included.
    pub fn param_count(&self) -> usize {
        self.embedding.len() + self.network.param_count()
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.is_finite() && self.network.is_finite()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config,
            embedding: self.embedding.cast(),
            network: self.network.cast(),
            vocab_fingerprint: self.vocab_fingerprint.clone(),
        }
    }

    /// Looks up every index of `seq`, giving a `max_len x embed_dim` matrix.
    pub fn embed(&self, seq: &[usize]) -> Result<Tensor<T>> {
        if seq.len() != self.config.max_len {
            return Err(Error::Shape(format!("sequence length {} != max_len {}", seq.len(), self.config.max_len)));
        }
        let d = self.config.embed_dim;
        let mut data = Vec::with_capacity(seq.len() * d);
        for &idx in seq {
            if idx >= self.config.vocab_capacity {
                return Err(Error::Shape(format!("token index {idx} >= capacity {}", self.config.vocab_capacity)));
            }
            data.extend_from_slice(self.embedding.row(idx));
        }
        Tensor::new(vec![seq.len(), d], data)
    }

    /// Output probabilities for one sequence.
    pub fn forward(&self, seq: &[usize], mode: Mode) -> Result<Tensor<T>> {
        self.network.forward(&self.embed(seq)?, mode)
    }

    /// Mean loss and summed gradients over `batch`, each example run with
    /// its own mode. Per-example work runs in parallel; results are summed
    /// in input order.
    pub fn batch_gradients(&self, batch: &[(&[usize], usize, Mode)]) -> Result<BatchGradients<T>> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let head = self.config.head;
        let per_example: Vec<_> = batch
            .par_iter()
            .map(|&(seq, label, mode)| {
                let x = self.embed(seq)?;
                let back = self.network.backward(&x, &head.target(label), mode)?;
                let correct = head.decide(back.output.data()) == label;
                Ok((back, correct))
            })
            .collect::<Result<_>>()?;

        let d = self.config.embed_dim;
        let inv = T::one() / T::of(batch.len() as f64);
        let mut embedding = Tensor::zeros(self.embedding.shape());
        let mut params: Vec<Tensor<T>> = self.network.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut loss = 0.0;
        let mut correct = 0;
        for ((seq, _, _), (back, ok)) in batch.iter().zip(&per_example) {
            loss += back.loss.as_f64();
            correct += usize::from(*ok);
            for (acc, g) in params.iter_mut().zip(&back.param_grads) {
                acc.add_scaled(inv, g)?;
            }
            if !self.config.freeze_embeddings {
                let ed = embedding.data_mut();
                for (t, &idx) in seq.iter().enumerate() {
                    for (e, &g) in ed[idx * d..(idx + 1) * d].iter_mut().zip(back.input_grad.row(t)) {
                        *e += g * inv;
                    }
                }
            }
        }
        Ok(BatchGradients { loss: loss / batch.len() as f64, correct, embedding, params })
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: 1, model: self.clone() };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile<T> = serde_json::from_str(json).map_err(|e| Error::format("model", e))?;
        if file.format != MODEL_FORMAT || file.version != 1 {
            return Err(Error::format("model", format!("unsupported format {} v{}", file.format, file.version)));
        }
        let model = file.model;
        model.config.validate()?;
        let rebuilt = Model::<T>::build(&ModelConfig { embedding_init: EmbeddingInit::Random, ..model.config }, None)?;
        let shapes = |m: &Model<T>| -> Vec<Vec<usize>> {
            std::iter::once(m.embedding.shape().to_vec())
                .chain(m.network.params().iter().map(|p| p.shape().to_vec()))
                .collect()
        };
        if shapes(&rebuilt) != shapes(&model) || rebuilt.network.layers.len() != model.network.layers.len() {
            return Err(Error::format("model", "parameter shapes disagree with the stored config"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

/// Gradients of the mean batch loss.
#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    pub loss: f64,
    pub correct: usize,
    /// Dense `V x D`; only rows that occur in the batch are non-zero.
    pub embedding: Tensor<T>,
    /// One per network parameter, in [`Network::params`] order.
    pub params: Vec<Tensor<T>>,
}

/// Sequences with integer labels: `0/1` for a binary head, class codes for
/// a multiclass one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labeled {
    pub sequences: Vec<TokenSequence>,
    pub labels: Vec<usize>,
}

impl Labeled {
    pub fn new(sequences: Vec<TokenSequence>, labels: Vec<usize>) -> Result<Self> {
        if sequences.len() != labels.len() {
            return Err(Error::Shape(format!("{} sequences but {} labels", sequences.len(), labels.len())));
        }
        Ok(Labeled { sequences, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check(&self, what: &str, config: &ModelConfig) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument(format!("{what} set is empty")));
        }
        if self.sequences.len() != self.labels.len() {
            return Err(Error::Shape(format!("{what}: sequences and labels differ in length")));
        }
        let classes = config.head.classes();
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "{what} example {i} has label {l}, but a {:?} head has {classes} classes",
                config.head
            )));
        }
        for (i, s) in self.sequences.iter().enumerate() {
            if s.len() != config.max_len {
                return Err(Error::Shape(format!("{what} example {i} has length {} != {}", s.len(), config.max_len)));
            }
            s.check(config.vocab_capacity)?;
        }
        Ok(())
    }
}

/// Metrics of one completed epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochMetrics>,
    /// Wall-clock seconds per epoch; not part of the CSV export.
    pub seconds: Vec<f64>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    /// The epoch with the lowest validation loss.
    pub fn best_val_loss(&self) -> Option<&EpochMetrics> {
        self.epochs.iter().min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for e in &self.epochs {
            let _ =
                writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        }
        out
    }

    pub fn from_csv(csv: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let mut epochs = Vec::new();
        for row in reader.deserialize() {
            epochs.push(row.map_err(|e| Error::format("history", e))?);
        }
        Ok(TrainingHistory { seconds: vec![0.0; epochs.len()], epochs })
    }
}

/// Mean loss and accuracy in inference mode over the whole set.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Labeled) -> Result<(f64, f64)> {
    data.check("evaluation", &model.config)?;
    let head = model.config.head;
    let results: Vec<(f64, bool)> = data
        .sequences
        .par_iter()
        .zip(&data.labels)
        .map(|(seq, &label)| {
            let out = model.forward(seq.as_slice(), Mode::inference())?;
            let l = crate::nn::loss(&out, &head.target(label), model.network.loss)?.as_f64();
            Ok((l, head.decide(out.data()) == label))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let acc = results.iter().filter(|r| r.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Minibatch Adam for `model.config.epochs` epochs. The example order is
/// reshuffled each epoch and every example gets its own dropout stream, all
/// derived from the config seed.
pub fn train_model<T: Scalar>(model: &mut Model<T>, train: &Labeled, validation: &Labeled) -> Result<TrainingHistory> {
    let config = model.config;
    config.validate()?;
    train.check("training", &config)?;
    validation.check("validation", &config)?;

    let mut adam = {
        let mut shapes: Vec<&[usize]> = vec![model.embedding.shape()];
        let net_params = model.network.params();
        shapes.extend(net_params.iter().map(|p| p.shape()));
        AdamState::<T>::new(config.learning_rate, &shapes)
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainingHistory::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let epoch_seed = mix_seed(config.seed, epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[usize], usize, Mode)> = chunk
                .iter()
                .map(|&i| {
                    (train.sequences[i].as_slice(), train.labels[i], Mode::training(mix_seed(epoch_seed, i as u64)))
                })
                .collect();
            let grads = model.batch_gradients(&batch)?;
            if !grads.loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}, batch {b}")));
            }
            loss_sum += grads.loss * chunk.len() as f64;
            correct += grads.correct;

            let mut refs: Vec<&Tensor<T>> = vec![&grads.embedding];
            refs.extend(grads.params.iter());
            let frozen_embedding = config.freeze_embeddings.then(|| model.embedding.clone());
            let mut params: Vec<&mut Tensor<T>> = vec![&mut model.embedding];
            params.extend(model.network.params_mut());
            adam.update(&mut params, &refs)?;
            if let Some(e) = frozen_embedding {
                model.embedding = e;
            }
        }
        if !model.is_finite() {
            return Err(Error::Numeric(format!("non-finite parameters after epoch {epoch}")));
        }

        let (val_loss, val_acc) = evaluate(model, validation)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_loss,
            val_acc,
        };
        info!(
            "epoch {epoch}/{}: loss {:.4} acc {:.4} val_loss {:.4} val_acc {:.4}",
            config.epochs, metrics.train_loss, metrics.train_acc, val_loss, val_acc
        );
        history.epochs.push(metrics);
        history.seconds.push(started.elapsed().as_secs_f64());
    }
    if let Some(best) = history.best_val_loss() {
        debug!("best validation loss {:.5} at epoch {}", best.val_loss, best.epoch);
    }
    Ok(history)
}

/// Class decision for a sigmoid output: bully iff `prob >= 0.5`.
pub fn binary_decision(prob: f64) -> BinaryLabel {
    if prob >= 0.5 {
        BinaryLabel::Bully
    } else {
        BinaryLabel::NotBully
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Binary { prob: f64, label: BinaryLabel },
    Multiclass { probs: [f64; ClassLabel::COUNT], label: ClassLabel },
}

impl Prediction {
    pub fn class_code(&self) -> usize {
        match self {
            Prediction::Binary { label, .. } => label.code(),
            Prediction::Multiclass { label, .. } => label.code(),
        }
    }

    pub fn label_name(&self) -> &'static str {
        match self {
            Prediction::Binary { label, .. } => label.name(),
            Prediction::Multiclass { label, .. } => label.name(),
        }
    }

    /// `[p]` for the binary head, the five class probabilities otherwise.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            Prediction::Binary { prob, .. } => vec![*prob],
            Prediction::Multiclass { probs, .. } => probs.to_vec(),
        }
    }
}

/// Inference-mode prediction for one padded sequence.
pub fn predict<T: Scalar>(model: &Model<T>, seq: &TokenSequence) -> Result<Prediction> {
    if seq.len() != model.config.max_len {
        return Err(Error::Shape(format!("sequence length {} != max_len {}", seq.len(), model.config.max_len)));
    }
    let out = model.forward(seq.as_slice(), Mode::inference())?;
    Ok(match model.config.head {
        Head::Binary => {
            let prob = out.data()[0].as_f64().clamp(0.0, 1.0);
            Prediction::Binary { prob, label: binary_decision(prob) }
        }
        Head::Multiclass => {
            let mut probs = [0.0; ClassLabel::COUNT];
            for (p, v) in probs.iter_mut().zip(out.data()) {
                *p = v.as_f64();
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let label = ClassLabel::from_code(argmax(probs)).expect("five classes");
            Prediction::Multiclass { probs, label }
        }
    })
}

pub fn predict_batch<T: Scalar>(model: &Model<T>, sequences: &[TokenSequence]) -> Result<Vec<Prediction>> {
    sequences.par_iter().map(|s| predict(model, s)).collect()
}

/// A model evaluated on a fixed batch, for finite-difference checks of the
/// full stack including the embedding lookup.
#[derive(Debug, Clone)]
pub struct ModelObjective {
    pub model: Model<f64>,
    pub batch: Vec<(Vec<usize>, usize, Mode)>,
}

impl ModelObjective {
    fn refs(&self) -> Vec<(&[usize], usize, Mode)> {
        self.batch.iter().map(|(s, l, m)| (s.as_slice(), *l, *m)).collect()
    }
}

impl GradientCheckable for ModelObjective {
    fn param_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        names.extend(self.model.network.param_names());
        names
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        let mut params = vec![&mut self.model.embedding];
        params.extend(self.model.network.params_mut());
        params
    }

    fn loss(&self) -> Result<f64> {
        Ok(self.model.batch_gradients(&self.refs())?.loss)
    }

    fn gradients(&self) -> Result<Vec<Tensor<f64>>> {
        let g = self.model.batch_gradients(&self.refs())?;
        let mut all = vec![g.embedding];
        all.extend(g.params);
        Ok(all)
    }

    fn kink_pattern(&self) -> Result<Vec<bool>> {
        let mut pattern = Vec::new();
        for (seq, _, mode) in &self.batch {
            pattern.extend(self.model.network.relu_pattern(&self.model.embed(seq)?, *mode)?);
        }
        Ok(pattern)
    }
}
