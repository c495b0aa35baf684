//! Skip-gram word embeddings trained with negative sampling.
//!
//! For a (center, context) pair with center vector `v` and output vectors
//! `u`, the per-pair loss is
//!
//! ```text
//! L = -ln sig(u_ctx . v) - sum_k ln sig(-u_neg_k . v)
//! ```
//!
//! with the negatives drawn from the unigram distribution raised to 3/4.
//! The center-word (input) matrix is what gets exported.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{Vocabulary, OOV_INDEX, PAD_INDEX, RESERVED};

pub const DEFAULT_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipgramConfig {
    pub dim: usize,
    /// Half-window: contexts are the `window` tokens either side.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial step size, decayed linearly to `1e-4` of itself.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig { dim: DEFAULT_DIM, window: 2, negatives: 5, epochs: 5, learning_rate: 0.025, seed: 42 }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.dim == 0 {
            return bad("embedding dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be > 0");
        }
        Ok(())
    }
}

/// A `V x D` matrix of word vectors; row 0 (padding) stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    vectors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    format: String,
    version: u32,
    dim: usize,
    vocab_capacity: usize,
    rows: Vec<Vec<f64>>,
}

const EMBEDDING_FORMAT: &str = "bangla-bully/embeddings";

impl EmbeddingMatrix {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        EmbeddingMatrix { dim, vectors: vec![0.0; vocab_size * dim] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("embedding rows differ in length".into()));
        }
        Ok(EmbeddingMatrix { dim, vectors: rows.concat() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }

    pub fn is_finite(&self) -> bool {
        self.vectors.iter().all(|v| v.is_finite())
    }

    /// Cosine similarity of two rows; 0 when either is the zero vector.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine(self.row(a), self.row(b))
    }

    pub fn to_json(&self) -> String {
        let file = EmbeddingFile {
            format: EMBEDDING_FORMAT.into(),
            version: 1,
            dim: self.dim,
            vocab_capacity: self.vocab_size(),
            rows: self.vectors.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string(&file).expect("embeddings serialize")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: EmbeddingFile = serde_json::from_str(json).map_err(|e| Error::format("embeddings", e))?;
        if file.format != EMBEDDING_FORMAT || file.version != 1 {
            return Err(Error::format("embeddings", format!("unsupported format {} v{}", file.format, file.version)));
        }
        if file.rows.len() != file.vocab_capacity || file.rows.iter().any(|r| r.len() != file.dim) {
            return Err(Error::format("embeddings", "row count or width disagrees with header"));
        }
        Ok(EmbeddingMatrix { dim: file.dim, vectors: file.rows.concat() })
    }

    /// `word v1 ... vD` per line, reserved rows written as `<pad>` and `<oov>`.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for index in 0..self.vocab_size() {
            let word = match index {
                PAD_INDEX => "<pad>",
                OOV_INDEX => "<oov>",
                i => match vocab.word_at(i) {
                    Some(w) => w,
                    None => continue,
                },
            };
            out.push_str(word);
            for v in self.row(index) {
                let _ = write!(out, " {v:.6}");
            }
            out.push('\n');
        }
        out
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

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// All `(w_i, w_j)` with `0 < |i - j| <= window` inside each sentence.
/// Padding indices are dropped before windowing.
pub fn generate_skipgram_pairs(sequences: &[Vec<usize>], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for sentence in sequences {
        let tokens: Vec<usize> = sentence.iter().copied().filter(|&t| t != PAD_INDEX).collect();
        for (i, &center) in tokens.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(tokens.len().saturating_sub(1));
            for (j, &context) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    pairs.push((center, context));
                }
            }
        }
    }
    pairs
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_sigmoid(x: f64) -> f64 {
    // ln sig(x) = -ln(1 + e^-x), computed without overflow
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Negative-sampling loss of one pair given explicit negatives.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    -ln_sigmoid(dot(context, center)) - negatives.iter().map(|n| ln_sigmoid(-dot(n, center))).sum::<f64>()
}

/// Sampling table for `count^0.75`.
#[derive(Debug, Clone)]
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Option<Self> {
        let mut total = 0.0;
        let cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                total += (c as f64).powf(0.75);
                total
            })
            .collect();
        (total > 0.0).then_some(NoiseTable { cumulative })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Input and output matrices of a skip-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramModel {
    vocab_size: usize,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl SkipgramModel {
    /// Input rows uniform in `(-0.5/D, 0.5/D)`, output rows zero, padding
    /// row zero.
    pub fn new(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let mut input: Vec<f64> = (0..vocab_size * dim).map(|_| rng.gen_range(-half..half)).collect();
        input[PAD_INDEX * dim..(PAD_INDEX + 1) * dim].iter_mut().for_each(|v| *v = 0.0);
        SkipgramModel { vocab_size, dim, input, output: vec![0.0; vocab_size * dim] }
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn output_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    /// Mean loss over `(center, context, negatives)` triples.
    pub fn mean_loss(&self, samples: &[(usize, usize, Vec<usize>)]) -> f64 {
        let total: f64 = samples
            .iter()
            .map(|(c, o, negs)| {
                let negs: Vec<&[f64]> = negs.iter().map(|&n| self.output_row(n)).collect();
                pair_loss(self.input_row(*c), self.output_row(*o), &negs)
            })
            .sum();
        total / samples.len().max(1) as f64
    }

    /// Gradient of the summed loss over `samples`, as (input, output)
    /// matrices.
    pub fn gradients(&self, samples: &[(usize, usize, Vec<usize>)]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut g_in = vec![0.0; self.input.len()];
        let mut g_out = vec![0.0; self.output.len()];
        for (c, o, negs) in samples {
            let v = self.input_row(*c);
            let targets = std::iter::once((*o, 1.0)).chain(negs.iter().map(|&n| (n, 0.0)));
            for (target, label) in targets {
                let u = self.output_row(target);
                let f: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                // d(-ln sig(+/-f))/df = sig(f) - label
                let g = sigmoid(f) - label;
                for k in 0..d {
                    g_in[c * d + k] += g * u[k];
                    g_out[target * d + k] += g * v[k];
                }
            }
        }
        (g_in, g_out)
    }

    /// Draws `negatives` noise words for each pair.
    pub fn sample_negatives(
        pairs: &[(usize, usize)],
        vocab_size: usize,
        negatives: usize,
        seed: u64,
    ) -> Result<Vec<(usize, usize, Vec<usize>)>> {
        let table = noise_table(pairs, vocab_size)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(pairs.iter().map(|&(c, o)| (c, o, (0..negatives).map(|_| table.sample(&mut rng)).collect())).collect())
    }

    /// Plain SGD over `pairs` in order, `config.epochs` times, with a
    /// linearly decaying step.
    pub fn train(&mut self, pairs: &[(usize, usize)], config: &SkipgramConfig) -> Result<()> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("no skip-gram pairs: nothing to train".into()));
        }
        let table = noise_table(pairs, self.vocab_size)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = self.dim;
        let total_steps = (pairs.len() * config.epochs) as f64;
        let floor = config.learning_rate * 1e-4;
        let mut step = 0usize;
        let mut grad_center = vec![0.0; d];

        for _ in 0..config.epochs {
            for &(c, o) in pairs {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps)).max(floor);
                step += 1;
                grad_center.iter_mut().for_each(|g| *g = 0.0);
                let (input, output) = (&mut self.input, &mut self.output);
                let v = &input[c * d..(c + 1) * d];
                for n in 0..=config.negatives {
                    let (target, label) = if n == 0 {
                        (o, 1.0)
                    } else {
                        let t = table.sample(&mut rng);
                        if t == o {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let u = &mut output[target * d..(target + 1) * d];
                    let f: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    let g = (label - sigmoid(f)) * lr;
                    for k in 0..d {
                        grad_center[k] += g * u[k];
                        u[k] += g * v[k];
                    }
                }
                for (x, g) in input[c * d..(c + 1) * d].iter_mut().zip(&grad_center) {
                    *x += g;
                }
            }
        }
        if !self.input.iter().chain(&self.output).all(|v| v.is_finite()) {
            return Err(Error::Numeric("skip-gram training produced non-finite weights".into()));
        }
        Ok(())
    }

    pub fn into_embeddings(self) -> EmbeddingMatrix {
        EmbeddingMatrix { dim: self.dim, vectors: self.input }
    }
}

fn noise_table(pairs: &[(usize, usize)], vocab_size: usize) -> Result<NoiseTable> {
    // context occurrences approximate token frequency
    let mut counts = vec![0u64; vocab_size];
    for &(c, o) in pairs {
        if c >= vocab_size || o >= vocab_size {
            return Err(Error::InvalidArgument(format!("pair ({c}, {o}) outside vocabulary of {vocab_size}")));
        }
        counts[o] += 1;
    }
    counts[PAD_INDEX] = 0;
    NoiseTable::new(&counts).ok_or_else(|| Error::InvalidArgument("no skip-gram pairs: nothing to train".into()))
}

/// Trains skip-gram embeddings and returns the center-word matrix.
pub fn train_embeddings(
    pairs: &[(usize, usize)],
    config: &SkipgramConfig,
    vocab_size: usize,
) -> Result<EmbeddingMatrix> {
    if vocab_size < 3 {
        return Err(Error::InvalidArgument(format!("vocabulary size must be >= 3, got {vocab_size}")));
    }
    let mut model = SkipgramModel::new(vocab_size, config.dim, config.seed);
    model.train(pairs, config)?;
    Ok(model.into_embeddings())
}

/// The `k` indexed words most cosine-similar to `word`, most similar first,
/// excluding `word` itself and the reserved rows.
pub fn nearest_neighbors(
    word: &str,
    k: usize,
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let query = vocab.index_of(word).ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
    if emb.vocab_size() < vocab.capacity() {
        return Err(Error::ArtifactMismatch(format!(
            "embedding has {} rows, vocabulary capacity is {}",
            emb.vocab_size(),
            vocab.capacity()
        )));
    }
    let mut scored: Vec<(usize, f64)> = vocab
        .words()
        .map(|(i, _)| i)
        .filter(|&i| i != query && i >= RESERVED)
        .map(|i| (i, emb.cosine(query, i)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, s)| (vocab.word_at(i).expect("indexed").to_string(), s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::fit_vocabulary;

    #[test]
    fn window_one_pairs() {
        let pairs = generate_skipgram_pairs(&[vec![2, 3, 4]], 1);
        assert_eq!(pairs, vec![(2, 3), (3, 2), (3, 4), (4, 3)]);
    }

    #[test]
    fn single_token_and_full_window() {
        assert!(generate_skipgram_pairs(&[vec![5]], 3).is_empty());
        for len in 1..8usize {
            let sentence: Vec<usize> = (2..2 + len).collect();
            assert_eq!(generate_skipgram_pairs(&[sentence], len).len(), len * (len - 1));
        }
    }

    #[test]
    fn padding_never_paired() {
        let pairs = generate_skipgram_pairs(&[vec![2, 3, 0, 0]], 3);
        assert!(pairs.iter().all(|&(c, o)| c != PAD_INDEX && o != PAD_INDEX));
    }

    #[test]
    fn empty_pairs_rejected() {
        assert!(train_embeddings(&[], &SkipgramConfig::default(), 10).is_err());
    }

    #[test]
    fn cosine_bounds_and_symmetry() {
        let emb =
            EmbeddingMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-3.0, 0.5], vec![2.0, 4.0]]).unwrap();
        assert!((emb.cosine(1, 3) - 1.0).abs() < 1e-12);
        assert_eq!(emb.cosine(1, 2), emb.cosine(2, 1));
        assert_eq!(emb.cosine(0, 1), 0.0);
    }

    #[test]
    fn neighbors_clamp_and_exclude_query() {
        let vocab = fit_vocabulary(&[vec!["a", "b", "c"]], 5).unwrap();
        let emb = EmbeddingMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        let n = nearest_neighbors("a", 10, &vocab, &emb).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].0, "b");
        assert!(n.iter().all(|(w, _)| w != "a"));
        assert!(matches!(nearest_neighbors("zzz", 1, &vocab, &emb), Err(Error::OutOfVocabulary(_))));
    }

    #[test]
    fn json_round_trip() {
        let emb = train_embeddings(&[(2, 3), (3, 2)], &SkipgramConfig { epochs: 1, ..Default::default() }, 4).unwrap();
        let back = EmbeddingMatrix::from_json(&emb.to_json()).unwrap();
        assert_eq!(back, emb);
    }
}
