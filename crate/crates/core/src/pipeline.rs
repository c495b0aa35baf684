//! The end-to-end experiment as resumable stages.
//!
//! Every stage reads what earlier stages wrote to the output directory and
//! writes its own artifacts there:
//!
//! | stage        | writes |
//! |--------------|--------|
//! | `preprocess` | `vocabulary.json`, `split.json`, `corpus_stats.json` |
//! | `embed`      | `embeddings.json`, `embeddings.txt` |
//! | `train`      | `model_{binary,multiclass}.json`, `history_{binary,multiclass}.csv`, `meta_*.csv` |
//! | `ensemble`   | `ensemble_comparison.{csv,txt}`, `meta_classifier.json` |
//! | `evaluate`   | `confusion_matrix*.csv`, `class_report.{csv,txt}`, `{binary,multiclass}_report.csv`, `summary.{json,txt}` |

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{
    binary_decision, predict, train_model, EmbeddingInit, Head, Labeled, Model, ModelConfig, Prediction,
};
use crate::corpus::{corpus_stats, load_dataset, split_indices, to_binary_label, ClassLabel, Comment, SplitSpec};
use crate::ensemble::{
    build_meta_features, evaluate_algorithm_set, predict_meta, predict_meta_batch, train_meta, Algorithm,
    AlgorithmScore, MetaClassifier, MetaFeature, MetaOptions, META_DIM,
};
use crate::error::{Error, Result};
use crate::metrics::{class_report, confusion_matrix, ClassReport};
use crate::nn::mix_seed;
use crate::text::{pad_sequence, Preprocessor, StopwordList, TokenSequence, Vocabulary};
use crate::word2vec::{generate_skipgram_pairs, train_embeddings, EmbeddingMatrix, SkipgramConfig};

pub const VOCABULARY: &str = "vocabulary.json";
pub const SPLIT: &str = "split.json";
pub const CORPUS_STATS: &str = "corpus_stats.json";
pub const EMBEDDINGS: &str = "embeddings.json";
pub const EMBEDDINGS_TEXT: &str = "embeddings.txt";
pub const MODEL_BINARY: &str = "model_binary.json";
pub const MODEL_MULTICLASS: &str = "model_multiclass.json";
pub const HISTORY_BINARY: &str = "history_binary.csv";
pub const HISTORY_MULTICLASS: &str = "history_multiclass.csv";
pub const META_OOF: &str = "meta_oof.csv";
pub const META_IN_SAMPLE: &str = "meta_in_sample.csv";
pub const META_VALIDATION: &str = "meta_validation.csv";
pub const COMPARISON: &str = "ensemble_comparison.csv";
pub const COMPARISON_TEXT: &str = "ensemble_comparison.txt";
pub const META_CLASSIFIER: &str = "meta_classifier.json";
pub const CONFUSION: &str = "confusion_matrix.csv";
pub const CONFUSION_NORMALIZED: &str = "confusion_matrix_normalized.csv";
pub const CLASS_REPORT: &str = "class_report.csv";
pub const CLASS_REPORT_TEXT: &str = "class_report.txt";
pub const BINARY_REPORT: &str = "binary_report.csv";
pub const MULTICLASS_REPORT: &str = "multiclass_report.csv";
pub const SUMMARY: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";

/// The CSV files whose bytes depend only on data, config and seed.
pub const METRIC_CSVS: [&str; 8] = [
    HISTORY_BINARY,
    HISTORY_MULTICLASS,
    COMPARISON,
    CONFUSION,
    CONFUSION_NORMALIZED,
    CLASS_REPORT,
    BINARY_REPORT,
    MULTICLASS_REPORT,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Algorithms compared on the held-out meta-features.
    pub algorithms: Vec<Algorithm>,
    /// Algorithm fitted on the full meta-training set and used for the
    /// final predictions.
    pub final_algorithm: Algorithm,
    /// Train the meta-classifiers on the networks' predictions for their
    /// own training data instead of out-of-fold predictions.
    pub in_sample: bool,
    /// Folds for out-of-fold meta-features (0 skips them).
    pub folds: usize,
    pub classifiers: MetaOptions,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            algorithms: Algorithm::ALL.to_vec(),
            final_algorithm: Algorithm::Svm,
            in_sample: false,
            folds: 2,
            classifiers: MetaOptions::default(),
        }
    }
}

/// Everything a run needs. `seed` overrides the seeds of every section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    /// `None` uses the bundled Bengali list.
    pub stopwords: Option<PathBuf>,
    pub seed: u64,
    pub split: SplitSpec,
    pub skipgram: SkipgramConfig,
    pub binary: ModelConfig,
    pub multiclass: ModelConfig,
    pub ensemble: EnsembleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut config = RunConfig {
            dataset: PathBuf::from("data/comments.csv"),
            output_dir: PathBuf::from("output"),
            stopwords: None,
            seed: 42,
            split: SplitSpec::default(),
            skipgram: SkipgramConfig::default(),
            binary: ModelConfig::binary(),
            multiclass: ModelConfig::multiclass(),
            ensemble: EnsembleConfig::default(),
        };
        config.set_seed(42);
        config
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.set_seed(config.seed);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.split.seed = seed;
        self.skipgram.seed = seed;
        self.binary.seed = seed;
        self.multiclass.seed = seed;
        self.ensemble.classifiers.seed = seed;
    }

    pub fn set_epochs(&mut self, epochs: usize) {
        self.binary.epochs = epochs;
        self.multiclass.epochs = epochs;
    }

    pub fn set_freeze_embeddings(&mut self, freeze: bool) {
        self.binary.freeze_embeddings = freeze;
        self.multiclass.freeze_embeddings = freeze;
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.split.validate().map_err(config_err)?;
        self.skipgram.validate().map_err(config_err)?;
        self.binary.validate().map_err(config_err)?;
        self.multiclass.validate().map_err(config_err)?;
        self.ensemble.classifiers.validate().map_err(config_err)?;
        if self.binary.head != Head::Binary || self.multiclass.head != Head::Multiclass {
            return Err(Error::Config("[binary] needs head = \"binary\", [multiclass] head = \"multiclass\"".into()));
        }
        let (b, m) = (&self.binary, &self.multiclass);
        if (b.max_len, b.vocab_capacity, b.embed_dim) != (m.max_len, m.vocab_capacity, m.embed_dim) {
            return Err(Error::Config("binary and multiclass must share max_len, vocab_capacity and embed_dim".into()));
        }
        if self.skipgram.dim != b.embed_dim {
            return Err(Error::Config(format!(
                "skipgram.dim {} differs from embed_dim {}",
                self.skipgram.dim, b.embed_dim
            )));
        }
        if self.ensemble.algorithms.is_empty() {
            return Err(Error::Config("ensemble.algorithms is empty".into()));
        }
        if self.ensemble.folds == 1 {
            return Err(Error::Config("ensemble.folds must be 0 or >= 2".into()));
        }
        if !self.ensemble.in_sample && self.ensemble.folds == 0 {
            return Err(Error::Config("out-of-fold meta-features need ensemble.folds >= 2".into()));
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn stopword_list(&self) -> Result<StopwordList> {
        match &self.stopwords {
            Some(p) => StopwordList::load(p),
            None => Ok(StopwordList::bengali()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitFile {
    dataset_sha256: String,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
    train: Vec<usize>,
    validation: Vec<usize>,
}

/// Dataset, fitted preprocessor and split, as restored from disk.
struct Prepared {
    comments: Vec<Comment>,
    preprocessor: Preprocessor,
    train: Vec<usize>,
    validation: Vec<usize>,
}

impl Prepared {
    fn load(config: &RunConfig) -> Result<Self> {
        let bytes = read(&config.dataset)?;
        let split: SplitFile = read_json(&config.path(SPLIT), "split")?;
        if split.dataset_sha256 != sha256_hex(&bytes) {
            return Err(Error::ArtifactMismatch(format!(
                "{} changed since preprocessing; rerun `preprocess`",
                config.dataset.display()
            )));
        }
        let comments = load_dataset(&config.dataset)?;
        let vocabulary = Vocabulary::load(config.path(VOCABULARY))?;
        if vocabulary.capacity() != config.binary.vocab_capacity {
            return Err(Error::ArtifactMismatch(format!(
                "vocabulary capacity {} but config says {}",
                vocabulary.capacity(),
                config.binary.vocab_capacity
            )));
        }
        let preprocessor =
            Preprocessor { stopwords: config.stopword_list()?, vocabulary, max_len: config.binary.max_len };
        Ok(Prepared { comments, preprocessor, train: split.train, validation: split.validation })
    }

    fn sequences(&self, idx: &[usize]) -> Vec<TokenSequence> {
        idx.iter().map(|&i| self.preprocessor.encode(&self.comments[i].text)).collect()
    }

    fn labels(&self, idx: &[usize]) -> Vec<ClassLabel> {
        idx.iter().map(|&i| self.comments[i].label).collect()
    }
}

fn labeled(sequences: &[TokenSequence], labels: &[ClassLabel], head: Head) -> Result<Labeled> {
    let codes = labels
        .iter()
        .map(|&l| match head {
            Head::Binary => to_binary_label(l).code(),
            Head::Multiclass => l.code(),
        })
        .collect();
    Labeled::new(sequences.to_vec(), codes)
}

/// Fits the vocabulary on the training split and records the split.
pub fn preprocess(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        create_dir(&config.output_dir)?;
        let bytes = read(&config.dataset)?;
        let comments = load_dataset(&config.dataset)?;
        if comments.is_empty() {
            return Err(Error::InvalidArgument(format!("{} has no data rows", config.dataset.display())));
        }
        let labels: Vec<ClassLabel> = comments.iter().map(|c| c.label).collect();
        let (train, validation) = split_indices(&labels, &config.split)?;
        let texts: Vec<&str> = train.iter().map(|&i| comments[i].text.as_str()).collect();
        let pre =
            Preprocessor::fit(&texts, config.stopword_list()?, config.binary.vocab_capacity, config.binary.max_len)?;
        let empty = comments.iter().filter(|c| pre.tokens(&c.text).is_empty()).count();
        if empty > 0 {
            warn!("{empty} comments have no tokens after preprocessing and become all-padding sequences");
        }
        info!(
            "{} comments, {} train / {} validation, {} distinct words ({} indexed)",
            comments.len(),
            train.len(),
            validation.len(),
            pre.vocabulary.total_distinct(),
            pre.vocabulary.indexed_len()
        );
        pre.vocabulary.save(config.path(VOCABULARY))?;
        let split = SplitFile {
            dataset_sha256: sha256_hex(&bytes),
            train_fraction: config.split.train_fraction,
            seed: config.split.seed,
            stratified: config.split.stratified,
            train,
            validation,
        };
        write_json(&config.path(SPLIT), &split)?;
        write_json(&config.path(CORPUS_STATS), &corpus_stats(&comments))
    };
    run().map_err(|e| e.in_stage("preprocess"))
}

/// Trains skip-gram embeddings on the training split.
pub fn embed(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let prep = Prepared::load(config)?;
        let sentences: Vec<Vec<usize>> =
            prep.train.iter().map(|&i| prep.preprocessor.encode_unpadded(&prep.comments[i].text)).collect();
        let pairs = generate_skipgram_pairs(&sentences, config.skipgram.window);
        info!("training {}-d embeddings on {} skip-gram pairs", config.skipgram.dim, pairs.len());
        let emb = train_embeddings(&pairs, &config.skipgram, config.binary.vocab_capacity)?;
        emb.save(config.path(EMBEDDINGS))?;
        write(&config.path(EMBEDDINGS_TEXT), emb.to_text(&prep.preprocessor.vocabulary))
    };
    run().map_err(|e| e.in_stage("embed"))
}

fn load_embeddings(config: &RunConfig, model: &ModelConfig) -> Result<Option<EmbeddingMatrix>> {
    match model.embedding_init {
        EmbeddingInit::Random => Ok(None),
        EmbeddingInit::Word2vec => {
            let path = config.path(EMBEDDINGS);
            if !path.exists() {
                return Err(Error::ArtifactMismatch(format!(
                    "{} not found; run `embed` first or set embedding_init = \"random\"",
                    path.display()
                )));
            }
            EmbeddingMatrix::load(path).map(Some)
        }
    }
}

fn fit_model(
    model_config: &ModelConfig,
    emb: Option<&EmbeddingMatrix>,
    fingerprint: &str,
    train: &Labeled,
    validation: &Labeled,
) -> Result<(Model, crate::classifiers::TrainingHistory)> {
    let mut model = Model::build(model_config, emb)?;
    model.vocab_fingerprint = Some(fingerprint.to_string());
    let history = train_model(&mut model, train, validation)?;
    Ok((model, history))
}

/// Stratified fold number for each position of `labels`.
fn fold_assignment(labels: &[ClassLabel], folds: usize, seed: u64) -> Vec<usize> {
    let mut groups: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for (_, mut members) in groups {
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            fold[i] = (offset + k) % folds;
        }
        offset += members.len();
    }
    fold
}

/// Trains both networks, then writes the meta-features the ensemble stage
/// consumes.
pub fn train(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let prep = Prepared::load(config)?;
        let fingerprint = prep.preprocessor.vocabulary.fingerprint();
        let train_seq = prep.sequences(&prep.train);
        let val_seq = prep.sequences(&prep.validation);
        let train_labels = prep.labels(&prep.train);
        let val_labels = prep.labels(&prep.validation);

        let mut models = Vec::new();
        for (model_config, model_file, history_file) in
            [(&config.binary, MODEL_BINARY, HISTORY_BINARY), (&config.multiclass, MODEL_MULTICLASS, HISTORY_MULTICLASS)]
        {
            info!("training the {:?} model for {} epochs", model_config.head, model_config.epochs);
            let emb = load_embeddings(config, model_config)?;
            let (model, history) = fit_model(
                model_config,
                emb.as_ref(),
                &fingerprint,
                &labeled(&train_seq, &train_labels, model_config.head)?,
                &labeled(&val_seq, &val_labels, model_config.head)?,
            )?;
            if let Some(best) = history.best_val_loss() {
                info!("best validation loss {:.5} at epoch {}", best.val_loss, best.epoch);
            }
            model.save(config.path(model_file))?;
            write(&config.path(history_file), history.to_csv())?;
            models.push(model);
        }
        let (binary, multiclass) = (&models[0], &models[1]);

        let in_sample = build_meta_features(binary, multiclass, &train_seq)?;
        write_meta(&config.path(META_IN_SAMPLE), &prep.train, &train_labels, &in_sample)?;
        let validation = build_meta_features(binary, multiclass, &val_seq)?;
        write_meta(&config.path(META_VALIDATION), &prep.validation, &val_labels, &validation)?;

        let folds = config.ensemble.folds;
        if folds >= 2 {
            let assignment = fold_assignment(&train_labels, folds, mix_seed(config.seed, 0xF0));
            let mut oof = vec![MetaFeature([0.0; META_DIM]); train_seq.len()];
            for k in 0..folds {
                let (held, kept): (Vec<usize>, Vec<usize>) = (0..train_seq.len()).partition(|&i| assignment[i] == k);
                let pick_s = |idx: &[usize]| idx.iter().map(|&i| train_seq[i].clone()).collect::<Vec<_>>();
                let pick_l = |idx: &[usize]| idx.iter().map(|&i| train_labels[i]).collect::<Vec<_>>();
                let (kept_s, kept_l, held_s, held_l) = (pick_s(&kept), pick_l(&kept), pick_s(&held), pick_l(&held));
                if kept_s.is_empty() || held_s.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "fold {k} of {folds} is empty; training split too small"
                    )));
                }
                info!("out-of-fold models {}/{folds}: {} train, {} held out", k + 1, kept.len(), held.len());
                let mut pair = Vec::new();
                for model_config in [&config.binary, &config.multiclass] {
                    let fold_config = ModelConfig { seed: mix_seed(model_config.seed, k as u64 + 1), ..*model_config };
                    let emb = load_embeddings(config, model_config)?;
                    let (model, _) = fit_model(
                        &fold_config,
                        emb.as_ref(),
                        &fingerprint,
                        &labeled(&kept_s, &kept_l, model_config.head)?,
                        &labeled(&held_s, &held_l, model_config.head)?,
                    )?;
                    pair.push(model);
                }
                let features = build_meta_features(&pair[0], &pair[1], &held_s)?;
                for (&i, f) in held.iter().zip(features) {
                    oof[i] = f;
                }
            }
            write_meta(&config.path(META_OOF), &prep.train, &train_labels, &oof)?;
        }
        Ok(())
    };
    run().map_err(|e| e.in_stage("train"))
}

/// Compares the four meta-classifiers and fits the final one.
pub fn ensemble(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let train_file = if config.ensemble.in_sample { META_IN_SAMPLE } else { META_OOF };
        let (_, train_labels, train_x) = read_meta_features(&config.path(train_file))?;
        let (_, val_labels, val_x) = read_meta_features(&config.path(META_VALIDATION))?;
        info!(
            "meta-classifiers on {} {} features, {} held out",
            train_x.len(),
            if config.ensemble.in_sample { "in-sample" } else { "out-of-fold" },
            val_x.len()
        );
        let options = &config.ensemble.classifiers;
        let comparison = evaluate_algorithm_set(
            (&train_x, &train_labels),
            (&val_x, &val_labels),
            &config.ensemble.algorithms,
            options,
        )?;
        write(&config.path(COMPARISON), comparison.to_csv())?;
        write(&config.path(COMPARISON_TEXT), comparison.to_text())?;
        let clf = train_meta(&train_x, &train_labels, config.ensemble.final_algorithm, options)?;
        clf.save(config.path(META_CLASSIFIER))
    };
    run().map_err(|e| e.in_stage("ensemble"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub train_size: usize,
    pub validation_size: usize,
    pub binary_val_accuracy: f64,
    pub multiclass_val_accuracy: f64,
    pub protocol: String,
    pub ensemble: Vec<AlgorithmScore>,
    pub final_algorithm: Algorithm,
    pub final_accuracy: f64,
}

impl Summary {
    pub fn best_ensemble(&self) -> Option<&AlgorithmScore> {
        self.ensemble.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples: {} train, {} validation", self.train_size, self.validation_size)?;
        writeln!(f, "binary validation accuracy:     {:.2}%", 100.0 * self.binary_val_accuracy)?;
        writeln!(f, "multiclass validation accuracy: {:.2}%", 100.0 * self.multiclass_val_accuracy)?;
        writeln!(f, "ensemble ({} meta-features):", self.protocol)?;
        writeln!(f, "  {:<14}{:>10}{:>11}{:>8}{:>10}", "Algorithm", "Accuracy", "Precision", "Recall", "F1 score")?;
        for r in &self.ensemble {
            writeln!(
                f,
                "  {:<14}{:>10.2}{:>11.2}{:>8.2}{:>10.2}",
                r.algorithm.name(),
                r.accuracy,
                r.precision,
                r.recall,
                r.f1
            )?;
        }
        write!(f, "final ({}): {:.2}%", self.final_algorithm, 100.0 * self.final_accuracy)
    }
}

fn report_for(truth: &[usize], predicted: &[usize], names: &[&str]) -> Result<ClassReport> {
    class_report(&confusion_matrix(truth, predicted, names.len())?.with_names(names)?)
}

/// Final predictions on the validation split, confusion matrix and
/// reports.
pub fn evaluate(config: &RunConfig) -> Result<Summary> {
    let run = || -> Result<Summary> {
        let clf = MetaClassifier::load(config.path(META_CLASSIFIER))?;
        let (_, labels, features) = read_meta_features(&config.path(META_VALIDATION))?;
        let (train_idx, _, _) = read_meta_features(&config.path(META_IN_SAMPLE))?;
        let names: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
        let truth: Vec<usize> = labels.iter().map(|l| l.code()).collect();

        let predicted: Vec<usize> = predict_meta_batch(&clf, &features).iter().map(|l| l.code()).collect();
        let matrix = confusion_matrix(&truth, &predicted, ClassLabel::COUNT)?.with_names(&names)?;
        let report = class_report(&matrix)?;
        write(&config.path(CONFUSION), matrix.to_csv(false))?;
        write(&config.path(CONFUSION_NORMALIZED), matrix.to_csv(true))?;
        write(&config.path(CLASS_REPORT), report.to_csv())?;
        write(&config.path(CLASS_REPORT_TEXT), format!("{}\n{}", matrix.to_text(true), report.to_text()))?;

        let bin_truth: Vec<usize> = labels.iter().map(|&l| to_binary_label(l).code()).collect();
        let bin_pred: Vec<usize> = features.iter().map(|f| binary_decision(f.binary_prob()).code()).collect();
        let binary = report_for(&bin_truth, &bin_pred, &["not bully", "bully"])?;
        write(&config.path(BINARY_REPORT), binary.to_csv())?;
        let multi_pred: Vec<usize> =
            features.iter().map(|f| crate::classifiers::argmax(f.class_probs().iter().copied())).collect();
        let multiclass = report_for(&truth, &multi_pred, &names)?;
        write(&config.path(MULTICLASS_REPORT), multiclass.to_csv())?;

        let comparison =
            std::fs::read_to_string(config.path(COMPARISON)).map_err(|e| Error::io(config.path(COMPARISON), e))?;
        let summary = Summary {
            train_size: train_idx.len(),
            validation_size: labels.len(),
            binary_val_accuracy: binary.accuracy,
            multiclass_val_accuracy: multiclass.accuracy,
            protocol: if config.ensemble.in_sample { "in-sample" } else { "out-of-fold" }.into(),
            ensemble: parse_comparison(&comparison)?,
            final_algorithm: clf.algorithm(),
            final_accuracy: report.accuracy,
        };
        write_json(&config.path(SUMMARY), &summary)?;
        write(&config.path(SUMMARY_TEXT), format!("{summary}\n"))?;
        Ok(summary)
    };
    run().map_err(|e| e.in_stage("evaluate"))
}

/// Every stage in order.
pub fn run_pipeline(config: &RunConfig) -> Result<Summary> {
    config.validate()?;
    preprocess(config)?;
    if [&config.binary, &config.multiclass].iter().any(|m| m.embedding_init == EmbeddingInit::Word2vec) {
        embed(config)?;
    }
    train(config)?;
    ensemble(config)?;
    evaluate(config)
}

/// Both networks' output, and the meta-classifier's when one was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TextPrediction {
    pub tokens: Vec<String>,
    pub binary: Prediction,
    pub multiclass: Prediction,
    pub ensemble: Option<(Algorithm, ClassLabel)>,
}

impl fmt::Display for TextPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tokens.is_empty() {
            writeln!(f, "tokens: (none; predicted on an all-padding sequence)")?;
        } else {
            writeln!(f, "tokens: {}", self.tokens.join(" "))?;
        }
        if let Prediction::Binary { prob, label } = self.binary {
            writeln!(f, "binary: {label} (p_bully = {prob:.4})")?;
        }
        if let Prediction::Multiclass { probs, label } = self.multiclass {
            let parts: Vec<String> =
                ClassLabel::ALL.iter().zip(probs).map(|(l, p)| format!("{} {:.2}%", l.name(), 100.0 * p)).collect();
            writeln!(f, "multiclass: {label} [{}]", parts.join(", "))?;
        }
        match self.ensemble {
            Some((a, label)) => write!(f, "ensemble ({a}): {label}"),
            None => write!(f, "ensemble: not available"),
        }
    }
}

/// Runs the saved preprocessing, both networks and, if present, the
/// meta-classifier on one raw comment.
pub fn predict_text(config: &RunConfig, text: &str) -> Result<TextPrediction> {
    let run = || -> Result<TextPrediction> {
        let vocabulary = Vocabulary::load(config.path(VOCABULARY))?;
        let fingerprint = vocabulary.fingerprint();
        let binary: Model = Model::load(config.path(MODEL_BINARY))?;
        let multiclass: Model = Model::load(config.path(MODEL_MULTICLASS))?;
        for m in [&binary, &multiclass] {
            if m.vocab_fingerprint.as_deref() != Some(fingerprint.as_str()) {
                return Err(Error::ArtifactMismatch("model was trained with a different vocabulary".into()));
            }
        }
        let pre = Preprocessor { stopwords: config.stopword_list()?, vocabulary, max_len: binary.config.max_len };
        let tokens = pre.tokens(text);
        if tokens.is_empty() {
            warn!("no tokens left after preprocessing; predicting on an all-padding sequence");
        }
        let seq = pad_sequence(&pre.vocabulary.encode(&tokens), pre.max_len);
        let b = predict(&binary, &seq)?;
        let m = predict(&multiclass, &seq)?;
        let meta_path = config.path(META_CLASSIFIER);
        let ensemble = if meta_path.exists() {
            let clf = MetaClassifier::load(meta_path)?;
            Some((clf.algorithm(), predict_meta(&clf, &MetaFeature::from_predictions(&b, &m)?)))
        } else {
            None
        };
        Ok(TextPrediction { tokens, binary: b, multiclass: m, ensemble })
    };
    run().map_err(|e| e.in_stage("predict"))
}

fn meta_header() -> String {
    let mut h = String::from("index,label,p_bully");
    for l in ClassLabel::ALL {
        let _ = write!(h, ",p_{}", l.name().replace(' ', "_"));
    }
    h
}

fn write_meta(path: &Path, idx: &[usize], labels: &[ClassLabel], features: &[MetaFeature]) -> Result<()> {
    let mut out = meta_header();
    out.push('\n');
    for ((i, l), f) in idx.iter().zip(labels).zip(features) {
        let _ = write!(out, "{i},{}", l.code());
        for v in f.0 {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write(path, out)
}

/// Reads a meta-feature CSV written by the train stage: dataset row
/// indices, labels and features.
pub fn read_meta_features(path: &Path) -> Result<(Vec<usize>, Vec<ClassLabel>, Vec<MetaFeature>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(meta_header().as_str()) {
        return Err(Error::format("meta-features", format!("{}: unexpected header", path.display())));
    }
    let (mut idx, mut labels, mut features) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let bad = || Error::format("meta-features", format!("{} line {}", path.display(), n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + META_DIM {
            return Err(bad());
        }
        idx.push(fields[0].parse().map_err(|_| bad())?);
        labels.push(fields[1].parse::<usize>().ok().and_then(ClassLabel::from_code).ok_or_else(bad)?);
        let mut v = [0.0; META_DIM];
        for (slot, s) in v.iter_mut().zip(&fields[2..]) {
            *slot = s.parse().map_err(|_| bad())?;
        }
        features.push(MetaFeature(v));
    }
    Ok((idx, labels, features))
}

fn parse_comparison(csv_text: &str) -> Result<Vec<AlgorithmScore>> {
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    for record in reader.records() {
        let r = record.map_err(|e| Error::format("comparison", e))?;
        let num = |i: usize| -> Result<f64> {
            r.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::format("comparison", format!("column {i}")))
        };
        rows.push(AlgorithmScore {
            algorithm: r.get(0).unwrap_or("").parse()?,
            accuracy: num(1)?,
            precision: num(2)?,
            recall: num(3)?,
            f1: num(4)?,
            macro_precision: num(5)?,
            macro_recall: num(6)?,
            macro_f1: num(7)?,
        });
    }
    Ok(rows)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value).expect("serializable"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(what, e))
}
