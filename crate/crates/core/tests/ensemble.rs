//! Meta-classifiers on synthetic meta-features.

use bangla_bully::classifiers::{Head, Model, ModelConfig};
use bangla_bully::corpus::{ClassLabel, SplitSpec};
use bangla_bully::ensemble::{
    build_meta_features, compare_algorithms, predict_meta, train_meta, Algorithm, DecisionTree, MetaFeature,
    MetaOptions, META_DIM,
};
use bangla_bully::text::pad_sequence;
use bangla_bully::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box-Muller standard normal.
fn normal<R: Rng>(r: &mut R) -> f64 {
    let u: f64 = r.gen_range(f64::EPSILON..1.0);
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn two_clusters(n: usize, seed: u64) -> (Vec<MetaFeature>, Vec<ClassLabel>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let (center, label) = if i % 2 == 0 { (0.25, ClassLabel::NonBully) } else { (0.75, ClassLabel::Religious) };
        let mut v = [0.0; META_DIM];
        v.iter_mut().for_each(|e| *e = center + 0.05 * normal(&mut r));
        x.push(MetaFeature(v));
        y.push(label);
    }
    (x, y)
}

#[test]
fn separable_clusters_fit_by_every_algorithm() {
    let (x, y) = two_clusters(200, 1);
    for a in Algorithm::ALL {
        let clf = train_meta(&x, &y, a, &MetaOptions::default()).unwrap();
        let correct = x.iter().zip(&y).filter(|(f, l)| predict_meta(&clf, f) == **l).count();
        let acc = correct as f64 / x.len() as f64;
        assert!(acc >= 0.95, "{a}: {acc}");
    }
}

/// Class probabilities from a model that is always right, with the binary
/// probability agreeing.
fn perfect_features(n: usize, seed: u64) -> (Vec<MetaFeature>, Vec<ClassLabel>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = ClassLabel::ALL[i % 5];
        let mut probs = [0.0; 5];
        let top = r.gen_range(0.6..0.99);
        let mut rest: Vec<f64> = (0..4).map(|_| r.gen::<f64>()).collect();
        let s: f64 = rest.iter().sum();
        rest.iter_mut().for_each(|v| *v *= (1.0 - top) / s);
        let mut it = rest.into_iter();
        for (c, p) in probs.iter_mut().enumerate() {
            *p = if c == label.code() { top } else { it.next().unwrap() };
        }
        let bully = if label == ClassLabel::NonBully { r.gen_range(0.0..0.3) } else { r.gen_range(0.7..1.0) };
        let mut v = [0.0; META_DIM];
        v[0] = bully;
        v[1..].copy_from_slice(&probs);
        x.push(MetaFeature(v));
        y.push(label);
    }
    (x, y)
}

#[test]
fn perfect_signal_survives_the_meta_layer() {
    let (x, y) = perfect_features(500, 2);
    let report = compare_algorithms(&x, &y, &SplitSpec::default(), &MetaOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 4);
    let order: Vec<_> = report.rows.iter().map(|r| r.algorithm).collect();
    assert_eq!(order, Algorithm::ALL);
    for row in &report.rows {
        assert_eq!(row.accuracy, 1.0, "{:?}", row);
        for v in [row.precision, row.recall, row.f1, row.macro_precision, row.macro_recall, row.macro_f1] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert_eq!(report.to_csv().lines().count(), 5);
}

#[test]
fn single_tree_leaves_are_pure_on_its_sample() {
    let (x, y) = perfect_features(120, 3);
    let codes: Vec<usize> = y.iter().map(|l| l.code()).collect();
    let tree = DecisionTree::fit(&x, &codes, (0..x.len()).collect(), 2, 7);
    for (f, &c) in x.iter().zip(&codes) {
        assert_eq!(tree.predict(f), c);
    }
}

#[test]
fn forest_recovers_training_labels_and_is_deterministic() {
    let (x, y) = two_clusters(100, 4);
    let options = MetaOptions { trees: 25, ..Default::default() };
    let a = train_meta(&x, &y, Algorithm::RandomForest, &options).unwrap();
    let b = train_meta(&x, &y, Algorithm::RandomForest, &options).unwrap();
    assert_eq!(a, b);
    for (f, l) in x.iter().zip(&y) {
        assert_eq!(predict_meta(&a, f), *l);
        assert_eq!(predict_meta(&a, f), predict_meta(&a, f));
    }
}

#[test]
fn meta_features_from_models() {
    let config = ModelConfig {
        max_len: 8,
        vocab_capacity: 20,
        embed_dim: 4,
        conv_filters: 2,
        lstm_units: 3,
        hidden_units: 4,
        ..ModelConfig::default()
    };
    let mut binary: Model = Model::build(&config, None).unwrap();
    let mut multi: Model = Model::build(&ModelConfig { head: Head::Multiclass, ..config }, None).unwrap();
    binary.vocab_fingerprint = Some("v1".into());
    multi.vocab_fingerprint = Some("v1".into());
    let seqs = vec![pad_sequence(&[2, 3, 4], 8), pad_sequence(&[5], 8), pad_sequence(&[2, 3, 4], 8)];
    let f = build_meta_features(&binary, &multi, &seqs).unwrap();
    assert_eq!(f.len(), 3);
    for v in &f {
        assert!((0.0..=1.0).contains(&v.binary_prob()));
        assert!((v.class_probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    assert_eq!(f[0], f[2]);

    multi.vocab_fingerprint = Some("v2".into());
    assert!(matches!(build_meta_features(&binary, &multi, &seqs), Err(Error::ArtifactMismatch(_))));
}
