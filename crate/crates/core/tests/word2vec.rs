//! Skip-gram objective and training behaviour.

use bangla_bully::nn::gradcheck::{gradient_check, GradientCheckable};
use bangla_bully::nn::Tensor;
use bangla_bully::word2vec::{generate_skipgram_pairs, train_embeddings, SkipgramConfig, SkipgramModel};
use bangla_bully::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Samples = Vec<(usize, usize, Vec<usize>)>;

struct SgnsObjective {
    vocab: usize,
    dim: usize,
    input: Tensor<f64>,
    output: Tensor<f64>,
    samples: Samples,
}

impl SgnsObjective {
    fn model(&self) -> SkipgramModel {
        let mut m = SkipgramModel::new(self.vocab, self.dim, 0);
        m.input_mut().copy_from_slice(self.input.data());
        m.output_mut().copy_from_slice(self.output.data());
        m
    }
}

impl GradientCheckable for SgnsObjective {
    fn param_names(&self) -> Vec<String> {
        vec!["input".into(), "output".into()]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        vec![&mut self.input, &mut self.output]
    }

    fn loss(&self) -> Result<f64> {
        Ok(self.model().mean_loss(&self.samples) * self.samples.len() as f64)
    }

    fn gradients(&self) -> Result<Vec<Tensor<f64>>> {
        let (gi, go) = self.model().gradients(&self.samples);
        Ok(vec![Tensor::new(vec![self.vocab, self.dim], gi)?, Tensor::new(vec![self.vocab, self.dim], go)?])
    }
}

#[test]
fn sgns_gradient_matches_finite_differences() {
    let (vocab, dim) = (7, 3);
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut rand_matrix = || Tensor::new(vec![vocab, dim], (0..vocab * dim).map(|_| r.gen_range(-0.8..0.8)).collect());
    let input = rand_matrix().unwrap();
    let output = rand_matrix().unwrap();
    let pairs = generate_skipgram_pairs(&[vec![2, 3, 4, 5, 6], vec![6, 2, 2, 3]], 2);
    let samples = SkipgramModel::sample_negatives(&pairs, vocab, 3, 9).unwrap();
    let mut obj = SgnsObjective { vocab, dim, input, output, samples };
    let report = gradient_check(&mut obj, 1e-5, 1e-4).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.max_rel_error() < 1e-6, "{}", report.max_rel_error());
}

fn twin_corpus(sentences: usize, seed: u64) -> Vec<Vec<usize>> {
    // tokens 2 and 3 are interchangeable; 4..12 are shared contexts,
    // 12..20 appear only with each other
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|i| {
            if i % 3 == 2 {
                (0..5).map(|_| r.gen_range(12..20)).collect()
            } else {
                let twin = r.gen_range(2..4);
                let ctx = r.gen_range(4..8);
                vec![r.gen_range(8..12), ctx, twin, ctx + 4, r.gen_range(4..8)]
            }
        })
        .collect()
}

#[test]
fn training_lowers_the_objective() {
    let vocab = 20;
    let pairs = generate_skipgram_pairs(&twin_corpus(600, 2), 2);
    let config = SkipgramConfig { epochs: 5, seed: 3, ..Default::default() };
    let held = SkipgramModel::sample_negatives(&pairs, vocab, 5, 99).unwrap();
    let mut model = SkipgramModel::new(vocab, config.dim, config.seed);
    let before = model.mean_loss(&held);
    model.train(&pairs, &config).unwrap();
    let after = model.mean_loss(&held);
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn interchangeable_tokens_embed_together() {
    let vocab = 20;
    let pairs = generate_skipgram_pairs(&twin_corpus(3000, 4), 2);
    let config = SkipgramConfig { epochs: 5, seed: 5, ..Default::default() };
    let emb = train_embeddings(&pairs, &config, vocab).unwrap();
    let twin = emb.cosine(2, 3);
    assert!(twin > 0.9, "twin cosine {twin}");
    let best_other = (4..vocab).map(|i| emb.cosine(2, i)).fold(f64::MIN, f64::max);
    assert!(twin > best_other, "{twin} <= {best_other}");
    assert!(emb.row(0).iter().all(|&v| v == 0.0));
}

#[test]
fn training_is_deterministic() {
    let pairs = generate_skipgram_pairs(&twin_corpus(200, 6), 2);
    let config = SkipgramConfig { seed: 11, ..Default::default() };
    let a = train_embeddings(&pairs, &config, 20).unwrap();
    let b = train_embeddings(&pairs, &config, 20).unwrap();
    assert_eq!(a, b);
    let c = train_embeddings(&pairs, &SkipgramConfig { seed: 12, ..config }, 20).unwrap();
    assert_ne!(a, c);
}
