//! Training-loop behaviour of the full classifier on small synthetic sets.

use std::time::Instant;

use bangla_bully::classifiers::{
    build_binary_model, build_multiclass_model, evaluate, predict, train_model, Head, Labeled, Model, ModelConfig,
    ModelObjective,
};
use bangla_bully::nn::gradcheck::gradient_check;
use bangla_bully::nn::Mode;
use bangla_bully::text::pad_sequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 60;

/// H=8, K=4, no dropout: the overfit checks measure memorisation, which
/// dropout on four channels only obscures.
fn reduced(head: Head, epochs: usize) -> ModelConfig {
    ModelConfig {
        vocab_capacity: VOCAB,
        conv_filters: 4,
        lstm_units: 8,
        hidden_units: 32,
        dropout: 0.0,
        recurrent_dropout: 0.0,
        batch_size: 8,
        head,
        epochs,
        learning_rate: 1e-2,
        ..ModelConfig::default()
    }
}

/// Each class owns four marker tokens; every example mixes two markers of
/// its class with shared filler tokens.
fn separable(classes: usize, n: usize, seed: u64) -> Labeled {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut sequences = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = i % classes;
        let len = r.gen_range(4..12);
        let mut tokens: Vec<usize> = (0..len).map(|_| r.gen_range(40..VOCAB)).collect();
        for _ in 0..len / 2 + 1 {
            let pos = r.gen_range(0..len);
            tokens[pos] = 2 + 4 * label + r.gen_range(0..4);
        }
        sequences.push(pad_sequence(&tokens, 120));
        labels.push(label);
    }
    Labeled::new(sequences, labels).unwrap()
}

#[test]
fn binary_model_overfits_32_examples() {
    let started = Instant::now();
    let data = separable(2, 32, 1);
    let config = reduced(Head::Binary, 200);
    let mut model = build_binary_model(&config, None).unwrap();
    let history = train_model(&mut model, &data, &data).unwrap();
    let (_, acc) = evaluate(&model, &data).unwrap();
    assert_eq!(acc, 1.0, "final history {:?}", history.last());
    assert_eq!(history.len(), 200);
    assert!(started.elapsed().as_secs() < 60);
}

#[test]
fn multiclass_model_overfits_50_examples() {
    let data = separable(5, 50, 2);
    let config = reduced(Head::Multiclass, 200);
    let mut model = build_multiclass_model(&config, None).unwrap();
    let history = train_model(&mut model, &data, &data).unwrap();
    let (_, acc) = evaluate(&model, &data).unwrap();
    assert_eq!(acc, 1.0, "final history {:?}", history.last());
}

#[test]
fn first_epoch_improves_on_initial_loss() {
    // both losses in inference mode over the full training set; the
    // history's running mean also counts batches seen before any update
    let data = separable(2, 32, 3);
    let mut model = build_binary_model(&reduced(Head::Binary, 1), None).unwrap();
    let (initial, _) = evaluate(&model, &data).unwrap();
    let history = train_model(&mut model, &data, &data).unwrap();
    let (after, _) = evaluate(&model, &data).unwrap();
    assert_eq!(after, history.epochs[0].val_loss);
    assert!(after < initial, "{after} >= {initial}");
}

#[test]
fn same_seed_same_history_and_weights() {
    let data = separable(5, 20, 4);
    let config = ModelConfig { dropout: 0.2, recurrent_dropout: 0.2, ..reduced(Head::Multiclass, 3) };
    let run = || {
        let mut m = build_multiclass_model(&config, None).unwrap();
        let h = train_model(&mut m, &data, &data).unwrap();
        (m, h)
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(h1.epochs, h2.epochs);
    assert_eq!(h1.to_csv(), h2.to_csv());
    assert_eq!(m1, m2);
    assert!(m1.is_finite());
}

#[test]
fn frozen_embeddings_stay_bit_identical() {
    let data = separable(2, 16, 5);
    let config = ModelConfig { freeze_embeddings: true, dropout: 0.2, ..reduced(Head::Binary, 2) };
    let mut model = build_binary_model(&config, None).unwrap();
    let before = model.embedding.clone();
    let net_before = model.network.clone();
    train_model(&mut model, &data, &data).unwrap();
    assert_eq!(model.embedding, before);
    assert_ne!(model.network, net_before);
}

#[test]
fn full_model_gradient_includes_embedding_rows() {
    let config = ModelConfig {
        max_len: 6,
        vocab_capacity: 8,
        embed_dim: 2,
        conv_filters: 2,
        conv_window: 3,
        lstm_units: 3,
        hidden_units: 4,
        head: Head::Multiclass,
        ..ModelConfig::default()
    };
    let model: Model<f64> = Model::build(&config, None).unwrap();
    let batch = vec![(vec![2, 3, 3, 7, 0, 0], 1, Mode::training(1)), (vec![4, 5, 6, 2, 1, 0], 4, Mode::training(2))];
    let mut obj = ModelObjective { model, batch };
    let report = gradient_check(&mut obj, 1e-5, 1e-4).unwrap();
    assert!(report.passed(), "{report:?}");
    let emb = &report.params[0];
    assert_eq!(emb.name, "embedding");
    assert!(emb.checked > 0);
}

#[test]
fn predictions_are_pure() {
    let model = build_binary_model(&reduced(Head::Binary, 1), None).unwrap();
    let seq = pad_sequence(&[3, 9, 41], 120);
    assert_eq!(predict(&model, &seq).unwrap(), predict(&model, &seq).unwrap());
}
