//! Second-stage classifiers over the two networks' predicted probabilities.
//!
//! Each example becomes a [`MetaFeature`]: the binary model's bully
//! probability followed by the multiclass model's five class
//! probabilities. Four classical learners are fitted on those vectors and
//! compared on held-out data.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{argmax, predict_batch, Head, Model, Prediction};
use crate::corpus::{split_indices, ClassLabel, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{class_report, confusion_matrix, ClassReport};
use crate::nn::{mix_seed, Scalar};
use crate::text::TokenSequence;

pub const META_DIM: usize = 1 + ClassLabel::COUNT;
const CLASSES: usize = ClassLabel::COUNT;

/// `[p_bully, p_non_bully, p_sexual, p_threat, p_troll, p_religious]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaFeature(pub [f64; META_DIM]);

impl MetaFeature {
    pub fn from_predictions(binary: &Prediction, multiclass: &Prediction) -> Result<Self> {
        match (binary, multiclass) {
            (Prediction::Binary { prob, .. }, Prediction::Multiclass { probs, .. }) => {
                let mut v = [0.0; META_DIM];
                v[0] = *prob;
                v[1..].copy_from_slice(probs);
                Ok(MetaFeature(v))
            }
            _ => Err(Error::InvalidArgument("meta-features need one binary and one multiclass prediction".into())),
        }
    }

    pub fn binary_prob(&self) -> f64 {
        self.0[0]
    }

    pub fn class_probs(&self) -> &[f64] {
        &self.0[1..]
    }
}

/// Runs both models in inference mode over `sequences`, in order.
pub fn build_meta_features<T: Scalar>(
    binary: &Model<T>,
    multiclass: &Model<T>,
    sequences: &[TokenSequence],
) -> Result<Vec<MetaFeature>> {
    if binary.head() != Head::Binary || multiclass.head() != Head::Multiclass {
        return Err(Error::InvalidArgument("expected a binary and a multiclass model, in that order".into()));
    }
    if binary.vocab_fingerprint != multiclass.vocab_fingerprint {
        return Err(Error::ArtifactMismatch(format!(
            "models were trained on different vocabularies ({:?} vs {:?})",
            binary.vocab_fingerprint, multiclass.vocab_fingerprint
        )));
    }
    let b = predict_batch(binary, sequences)?;
    let m = predict_batch(multiclass, sequences)?;
    b.iter().zip(&m).map(|(b, m)| MetaFeature::from_predictions(b, m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RandomForest,
    Svm,
    Knn,
    NaiveBayes,
}

impl Algorithm {
    /// Report order.
    pub const ALL: [Algorithm; 4] = [Algorithm::RandomForest, Algorithm::Svm, Algorithm::Knn, Algorithm::NaiveBayes];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "Random Forest",
            Algorithm::Svm => "SVM",
            Algorithm::Knn => "KNN",
            Algorithm::NaiveBayes => "Naive Bayes",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "random_forest",
            Algorithm::Svm => "svm",
            Algorithm::Knn => "knn",
            Algorithm::NaiveBayes => "naive_bayes",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "randomforest" | "rf" => Ok(Algorithm::RandomForest),
            "svm" => Ok(Algorithm::Svm),
            "knn" => Ok(Algorithm::Knn),
            "naivebayes" | "nb" => Ok(Algorithm::NaiveBayes),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Hyperparameters of the four learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaOptions {
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub trees: usize,
    pub features_per_split: usize,
    pub knn_k: usize,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for MetaOptions {
    fn default() -> Self {
        MetaOptions {
            svm_lambda: 1e-4,
            svm_epochs: 100,
            trees: 100,
            features_per_split: 2,
            knn_k: 5,
            variance_floor: 1e-9,
            seed: 42,
        }
    }
}

impl MetaOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.svm_lambda > 0.0) {
            return bad("svm_lambda must be > 0");
        }
        if self.svm_epochs == 0 || self.trees == 0 || self.knn_k == 0 {
            return bad("svm_epochs, trees and knn_k must be >= 1");
        }
        if self.features_per_split == 0 || self.features_per_split > META_DIM {
            return bad("features_per_split must be in 1..=6");
        }
        if !(self.variance_floor > 0.0) {
            return bad("variance_floor must be > 0");
        }
        Ok(())
    }
}

/// One-vs-rest linear SVMs, one hyperplane per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<[f64; META_DIM]>,
    pub biases: Vec<f64>,
    /// Classes absent from training never win the argmax.
    pub present: Vec<bool>,
}

impl LinearSvm {
    /// Pegasos on the hinge loss with the bias as an extra, regularized
    /// weight on a constant feature.
    fn fit(x: &[MetaFeature], y: &[usize], lambda: f64, epochs: usize, seed: u64) -> Self {
        let mut present = vec![false; CLASSES];
        y.iter().for_each(|&c| present[c] = true);
        let radius = 1.0 / lambda.sqrt();
        let (weights, biases) = (0..CLASSES)
            .into_par_iter()
            .map(|class| {
                let mut w = [0.0; META_DIM + 1];
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, class as u64));
                let mut order: Vec<usize> = (0..x.len()).collect();
                let mut t = 0u64;
                for _ in 0..epochs {
                    order.shuffle(&mut rng);
                    for &i in &order {
                        t += 1;
                        let eta = 1.0 / (lambda * t as f64);
                        let target = if y[i] == class { 1.0 } else { -1.0 };
                        let xi = augmented(&x[i]);
                        let margin = target * dot7(&w, &xi);
                        let shrink = 1.0 - eta * lambda;
                        w.iter_mut().for_each(|v| *v *= shrink);
                        if margin < 1.0 {
                            for (v, xv) in w.iter_mut().zip(&xi) {
                                *v += eta * target * xv;
                            }
                        }
                        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > radius {
                            w.iter_mut().for_each(|v| *v *= radius / norm);
                        }
                    }
                }
                let mut weights = [0.0; META_DIM];
                weights.copy_from_slice(&w[..META_DIM]);
                (weights, w[META_DIM])
            })
            .unzip();
        LinearSvm { weights, biases, present }
    }

    pub fn scores(&self, x: &MetaFeature) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .zip(&self.present)
            .map(
                |((w, b), &p)| {
                    if p {
                        w.iter().zip(&x.0).map(|(a, b)| a * b).sum::<f64>() + b
                    } else {
                        f64::NEG_INFINITY
                    }
                },
            )
            .collect()
    }
}

fn augmented(x: &MetaFeature) -> [f64; META_DIM + 1] {
    let mut a = [1.0; META_DIM + 1];
    a[..META_DIM].copy_from_slice(&x.0);
    a
}

fn dot7(a: &[f64; META_DIM + 1], b: &[f64; META_DIM + 1]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A CART tree; node 0 is the root. Samples with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Grows a tree on `samples` (indices into `x`, repeats allowed) until
    /// every leaf is pure or admits no split.
    pub fn fit(x: &[MetaFeature], y: &[usize], samples: Vec<usize>, mtry: usize, seed: u64) -> Self {
        Self::fit_with(x, y, samples, mtry, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn fit_with(x: &[MetaFeature], y: &[usize], samples: Vec<usize>, mtry: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        tree.grow(x, y, samples, mtry, rng);
        tree
    }

    fn grow(
        &mut self,
        x: &[MetaFeature],
        y: &[usize],
        samples: Vec<usize>,
        mtry: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        let counts = class_counts(y, &samples);
        let majority = argmax(counts.iter().map(|&c| c as f64));
        self.nodes.push(TreeNode::Leaf { class: majority });
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            return id;
        }

        let mut features: Vec<usize> = (0..META_DIM).collect();
        features.shuffle(rng);
        // the first `mtry` features are the candidates; later ones are only
        // consulted when none of those admits any split
        let mut best: Option<(f64, usize, f64)> = None;
        for (rank, &f) in features.iter().enumerate() {
            if rank >= mtry && best.is_some() {
                break;
            }
            if let Some((impurity, threshold)) = best_split(x, y, &samples, f) {
                if best.map_or(true, |(b, _, _)| impurity < b) {
                    best = Some((impurity, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| x[i].0[feature] <= threshold);
        let left = self.grow(x, y, l, mtry, rng);
        let right = self.grow(x, y, r, mtry, rng);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }

    pub fn predict(&self, x: &MetaFeature) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x.0[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], n: usize) -> usize {
            match nodes[n] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn class_counts(y: &[usize], samples: &[usize]) -> [usize; CLASSES] {
    let mut counts = [0; CLASSES];
    samples.iter().for_each(|&i| counts[y[i]] += 1);
    counts
}

fn gini(counts: &[usize; CLASSES], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Lowest weighted child Gini over midpoints between distinct values of
/// `feature`, or `None` when the feature is constant on `samples`.
fn best_split(x: &[MetaFeature], y: &[usize], samples: &[usize], feature: usize) -> Option<(f64, f64)> {
    let mut sorted: Vec<(f64, usize)> = samples.iter().map(|&i| (x[i].0[feature], y[i])).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut right = [0usize; CLASSES];
    sorted.iter().for_each(|&(_, c)| right[c] += 1);
    let mut left = [0usize; CLASSES];
    let mut best: Option<(f64, f64)> = None;
    for k in 1..n {
        let (v, c) = sorted[k - 1];
        left[c] += 1;
        right[c] -= 1;
        let next = sorted[k].0;
        if next <= v {
            continue;
        }
        let impurity = (k as f64 * gini(&left, k) + (n - k) as f64 * gini(&right, n - k)) / n as f64;
        if best.map_or(true, |(b, _)| impurity < b) {
            let mid = v + (next - v) / 2.0;
            // guard against the midpoint rounding up onto `next`
            let threshold = if mid < next { mid } else { v };
            best = Some((impurity, threshold));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    fn fit(x: &[MetaFeature], y: &[usize], trees: usize, mtry: usize, seed: u64) -> Self {
        let n = x.len();
        let trees = (0..trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                DecisionTree::fit_with(x, y, bootstrap, mtry, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn votes(&self, x: &MetaFeature) -> [usize; CLASSES] {
        let mut votes = [0; CLASSES];
        self.trees.iter().for_each(|t| votes[t.predict(x)] += 1);
        votes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub features: Vec<MetaFeature>,
    pub labels: Vec<usize>,
}

impl Knn {
    /// Labels of the `k` nearest training points, closest first; equal
    /// distances keep training order.
    pub fn neighbors(&self, x: &MetaFeature) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.0.iter().zip(&x.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| self.labels[i]).collect()
    }
}

/// Gaussian naive Bayes with per-class, per-feature mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Class frequencies; 0 for classes absent from training.
    pub priors: Vec<f64>,
    pub means: Vec<[f64; META_DIM]>,
    pub variances: Vec<[f64; META_DIM]>,
}

impl GaussianNb {
    fn fit(x: &[MetaFeature], y: &[usize], floor: f64) -> Self {
        let n = x.len() as f64;
        let mut priors = vec![0.0; CLASSES];
        let mut means = vec![[0.0; META_DIM]; CLASSES];
        let mut variances = vec![[1.0; META_DIM]; CLASSES];
        for c in 0..CLASSES {
            let members: Vec<&MetaFeature> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(f, _)| f).collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len() as f64;
            priors[c] = m / n;
            for j in 0..META_DIM {
                let mean = members.iter().map(|f| f.0[j]).sum::<f64>() / m;
                let var = members.iter().map(|f| (f.0[j] - mean).powi(2)).sum::<f64>() / m;
                means[c][j] = mean;
                variances[c][j] = var.max(floor);
            }
        }
        GaussianNb { priors, means, variances }
    }

    pub fn log_posteriors(&self, x: &MetaFeature) -> Vec<f64> {
        (0..CLASSES)
            .map(|c| {
                if self.priors[c] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                self.priors[c].ln()
                    + (0..META_DIM)
                        .map(|j| {
                            let v = self.variances[c][j];
                            -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x.0[j] - self.means[c][j]).powi(2) / v)
                        })
                        .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum MetaClassifier {
    Svm(LinearSvm),
    RandomForest(RandomForest),
    Knn(Knn),
    NaiveBayes(GaussianNb),
}

const META_FORMAT: &str = "bangla-bully/meta-classifier";

#[derive(Serialize, Deserialize)]
struct MetaFile {
    format: String,
    version: u32,
    classifier: MetaClassifier,
}

impl MetaClassifier {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            MetaClassifier::Svm(_) => Algorithm::Svm,
            MetaClassifier::RandomForest(_) => Algorithm::RandomForest,
            MetaClassifier::Knn(_) => Algorithm::Knn,
            MetaClassifier::NaiveBayes(_) => Algorithm::NaiveBayes,
        }
    }

    pub fn to_json(&self) -> String {
        let file = MetaFile { format: META_FORMAT.into(), version: 1, classifier: self.clone() };
        serde_json::to_string(&file).expect("classifier serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: MetaFile = serde_json::from_str(json).map_err(|e| Error::format("meta-classifier", e))?;
        if file.format != META_FORMAT || file.version != 1 {
            return Err(Error::format(
                "meta-classifier",
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        Ok(file.classifier)
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

pub fn train_meta(
    features: &[MetaFeature],
    labels: &[ClassLabel],
    algorithm: Algorithm,
    options: &MetaOptions,
) -> Result<MetaClassifier> {
    options.validate()?;
    if features.len() != labels.len() {
        return Err(Error::Shape(format!("{} features but {} labels", features.len(), labels.len())));
    }
    if features.is_empty() {
        return Err(Error::InvalidArgument("meta-classifier training set is empty".into()));
    }
    if features.iter().any(|f| f.0.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("non-finite meta-feature".into()));
    }
    let y: Vec<usize> = labels.iter().map(|l| l.code()).collect();
    Ok(match algorithm {
        Algorithm::Svm => {
            MetaClassifier::Svm(LinearSvm::fit(features, &y, options.svm_lambda, options.svm_epochs, options.seed))
        }
        Algorithm::RandomForest => MetaClassifier::RandomForest(RandomForest::fit(
            features,
            &y,
            options.trees,
            options.features_per_split,
            options.seed,
        )),
        Algorithm::Knn => MetaClassifier::Knn(Knn { k: options.knn_k, features: features.to_vec(), labels: y }),
        Algorithm::NaiveBayes => MetaClassifier::NaiveBayes(GaussianNb::fit(features, &y, options.variance_floor)),
    })
}

/// Class decision; every tie goes to the lowest class index.
pub fn predict_meta(classifier: &MetaClassifier, feature: &MetaFeature) -> ClassLabel {
    let code = match classifier {
        MetaClassifier::Svm(s) => argmax(s.scores(feature)),
        MetaClassifier::RandomForest(f) => argmax(f.votes(feature).iter().map(|&v| v as f64)),
        MetaClassifier::Knn(k) => {
            let mut votes = [0usize; CLASSES];
            k.neighbors(feature).into_iter().for_each(|c| votes[c] += 1);
            argmax(votes.iter().map(|&v| v as f64))
        }
        MetaClassifier::NaiveBayes(nb) => argmax(nb.log_posteriors(feature)),
    };
    ClassLabel::from_code(code).expect("five classes")
}

pub fn predict_meta_batch(classifier: &MetaClassifier, features: &[MetaFeature]) -> Vec<ClassLabel> {
    features.par_iter().map(|f| predict_meta(classifier, f)).collect()
}

/// Scores of one algorithm on the held-out meta-features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmScore {
    pub algorithm: Algorithm,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<AlgorithmScore>,
    pub reports: Vec<ClassReport>,
}

impl Comparison {
    pub fn best(&self) -> &AlgorithmScore {
        let i = argmax(self.rows.iter().map(|r| r.accuracy));
        &self.rows[i]
    }

    pub fn row(&self, algorithm: Algorithm) -> Option<&AlgorithmScore> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    /// Weighted averages in the main columns, macro averages after them.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("algorithm,accuracy,precision,recall,f1_score,macro_precision,macro_recall,macro_f1\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                r.algorithm.name(),
                r.accuracy,
                r.precision,
                r.recall,
                r.f1,
                r.macro_precision,
                r.macro_recall,
                r.macro_f1
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out =
            format!("{:<14}{:>10}{:>11}{:>8}{:>10}\n", "Algorithm", "Accuracy", "Precision", "Recall", "F1 score");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>11.2}{:>8.2}{:>10.2}",
                r.algorithm.name(),
                r.accuracy,
                r.precision,
                r.recall,
                r.f1
            );
        }
        out
    }
}

/// Fits each algorithm on the training features and scores it on the
/// held-out ones, in [`Algorithm::ALL`] order.
pub fn evaluate_algorithms(
    train: (&[MetaFeature], &[ClassLabel]),
    test: (&[MetaFeature], &[ClassLabel]),
    options: &MetaOptions,
) -> Result<Comparison> {
    evaluate_algorithm_set(train, test, &Algorithm::ALL, options)
}

/// [`evaluate_algorithms`] restricted to `algorithms`, in the given order.
pub fn evaluate_algorithm_set(
    train: (&[MetaFeature], &[ClassLabel]),
    test: (&[MetaFeature], &[ClassLabel]),
    algorithms: &[Algorithm],
    options: &MetaOptions,
) -> Result<Comparison> {
    if algorithms.is_empty() {
        return Err(Error::InvalidArgument("no meta-classifier algorithms selected".into()));
    }
    if test.0.len() != test.1.len() {
        return Err(Error::Shape("held-out features and labels differ in length".into()));
    }
    let truth: Vec<usize> = test.1.iter().map(|l| l.code()).collect();
    let names: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &algorithm in algorithms {
        let clf = train_meta(train.0, train.1, algorithm, options)?;
        let predicted: Vec<usize> = predict_meta_batch(&clf, test.0).iter().map(|l| l.code()).collect();
        let report = class_report(&confusion_matrix(&truth, &predicted, CLASSES)?.with_names(&names)?)?;
        rows.push(AlgorithmScore {
            algorithm,
            accuracy: report.accuracy,
            precision: report.weighted_avg.precision,
            recall: report.weighted_avg.recall,
            f1: report.weighted_avg.f1,
            macro_precision: report.macro_avg.precision,
            macro_recall: report.macro_avg.recall,
            macro_f1: report.macro_avg.f1,
        });
        reports.push(report);
    }
    Ok(Comparison { rows, reports })
}

/// Splits `features` per `split`, then [`evaluate_algorithms`].
pub fn compare_algorithms(
    features: &[MetaFeature],
    labels: &[ClassLabel],
    split: &SplitSpec,
    options: &MetaOptions,
) -> Result<Comparison> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!("{} features but {} labels", features.len(), labels.len())));
    }
    let (tr, te) = split_indices(labels, split)?;
    let pick_f = |idx: &[usize]| idx.iter().map(|&i| features[i]).collect::<Vec<_>>();
    let pick_l = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    evaluate_algorithms((&pick_f(&tr), &pick_l(&tr)), (&pick_f(&te), &pick_l(&te)), options)
}
