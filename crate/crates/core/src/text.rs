//! Turning raw Bengali comment text into fixed-length index sequences.
//!
//! The steps are: [`normalize`], whitespace tokenization, [`remove_stopwords`],
//! [`Vocabulary::encode`] and [`pad_sequence`]. [`Preprocessor`] bundles them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const PAD_INDEX: usize = 0;
pub const OOV_INDEX: usize = 1;
pub const RESERVED: usize = 2;
pub const DEFAULT_MAX_LEN: usize = 120;
pub const DEFAULT_CAPACITY: usize = 19469;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_bn.txt");

fn keep_bengali(c: char) -> bool {
    // Letters, vowel signs, virama and digits; the currency signs, fraction
    // numerators and isshar (U+09F2..=U+09FB) are symbols.
    matches!(c, '\u{0980}'..='\u{09F1}' | '\u{09FC}' | '\u{09FE}')
}

/// NFC-normalizes `text`, keeps Bengali letters and digits plus ASCII
/// letters (lowercased) and digits, and turns everything else into single
/// spaces. Zero-width joiners are dropped without leaving a gap.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.nfc() {
        let kept = if keep_bengali(c) || c.is_ascii_digit() {
            Some(c)
        } else if c.is_ascii_alphabetic() {
            Some(c.to_ascii_lowercase())
        } else if c == '\u{200C}' || c == '\u{200D}' {
            continue;
        } else {
            None
        };
        match kept {
            Some(c) => {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                out.push(c);
            }
            None => pending_space = true,
        }
    }
    out
}

/// Whitespace tokenization of normalized text.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// A set of words to drop before indexing.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: BTreeSet<String>,
    // NFC forms, which is what `normalize` emits.
    lookup: HashSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> =
            words.into_iter().map(Into::into).map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect();
        let lookup = words.iter().map(|w| normalize(w)).collect();
        StopwordList { words, lookup }
    }

    /// The bundled Bengali list (398 entries).
    pub fn bengali() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One word per line; blank lines are ignored.
    pub fn parse(contents: &str) -> Self {
        Self::new(contents.lines())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&contents))
    }

    pub fn empty() -> Self {
        Self::new(std::iter::empty::<String>())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup.contains(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

pub fn remove_stopwords(tokens: &[String], stoplist: &StopwordList) -> Vec<String> {
    tokens.iter().filter(|t| !stoplist.contains(t)).cloned().collect()
}

/// Frequency-ranked word index with two reserved slots: 0 for padding and
/// 1 for out-of-vocabulary words. Corpus words start at index 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_index: HashMap<String, usize>,
    index_to_word: Vec<String>,
    capacity: usize,
    total_distinct: usize,
}

/// Fits a vocabulary on tokenized sentences. The `capacity - 2` most
/// frequent words are indexed; ties go to the word seen first.
pub fn fit_vocabulary<S: AsRef<str>>(corpus: &[Vec<S>], capacity: usize) -> Result<Vocabulary> {
    if capacity < 3 {
        return Err(Error::InvalidArgument(format!("vocabulary capacity must be >= 3, got {capacity}")));
    }
    // word -> (count, first occurrence)
    let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
    let mut position = 0usize;
    for sentence in corpus {
        for word in sentence {
            let entry = counts.entry(word.as_ref()).or_insert((0, position));
            entry.0 += 1;
            position += 1;
        }
    }
    let total_distinct = counts.len();
    let mut ranked: Vec<(&str, u64, usize)> = counts.into_iter().map(|(w, (n, first))| (w, n, first)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(capacity - RESERVED);

    let index_to_word: Vec<String> = ranked.into_iter().map(|(w, _, _)| w.to_string()).collect();
    let word_to_index = index_to_word.iter().enumerate().map(|(i, w)| (w.clone(), i + RESERVED)).collect();
    Ok(Vocabulary { word_to_index, index_to_word, capacity, total_distinct })
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    format: String,
    version: u32,
    capacity: usize,
    total_distinct: usize,
    pad_index: usize,
    oov_index: usize,
    words: BTreeMap<String, usize>,
}

const VOCAB_FORMAT: &str = "bangla-bully/vocabulary";

impl Vocabulary {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of distinct words seen while fitting, indexed or not.
    pub fn total_distinct(&self) -> usize {
        self.total_distinct
    }

    /// Number of indexed corpus words (excludes the reserved slots).
    pub fn indexed_len(&self) -> usize {
        self.index_to_word.len()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.word_to_index.get(word).copied()
    }

    pub fn word_at(&self, index: usize) -> Option<&str> {
        index.checked_sub(RESERVED).and_then(|i| self.index_to_word.get(i)).map(String::as_str)
    }

    /// Indexed words in index order, starting at index 2.
    pub fn words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.index_to_word.iter().enumerate().map(|(i, w)| (i + RESERVED, w.as_str()))
    }

    /// Maps every token to its index, or to [`OOV_INDEX`] when unknown.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t.as_ref()).unwrap_or(OOV_INDEX)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            format: VOCAB_FORMAT.into(),
            version: 1,
            capacity: self.capacity,
            total_distinct: self.total_distinct,
            pad_index: PAD_INDEX,
            oov_index: OOV_INDEX,
            words: self.word_to_index.iter().map(|(w, i)| (w.clone(), *i)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(json).map_err(|e| Error::format("vocabulary", e))?;
        if file.format != VOCAB_FORMAT || file.version != 1 {
            return Err(Error::format("vocabulary", format!("unsupported format {} v{}", file.format, file.version)));
        }
        if file.pad_index != PAD_INDEX || file.oov_index != OOV_INDEX {
            return Err(Error::format("vocabulary", "unexpected reserved indices"));
        }
        let n = file.words.len();
        if n + RESERVED > file.capacity {
            return Err(Error::format("vocabulary", "more words than capacity allows"));
        }
        let mut index_to_word = vec![None; n];
        for (word, &index) in &file.words {
            let slot = index
                .checked_sub(RESERVED)
                .and_then(|i| index_to_word.get_mut(i))
                .ok_or_else(|| Error::format("vocabulary", format!("index {index} out of range")))?;
            if slot.replace(word.clone()).is_some() {
                return Err(Error::format("vocabulary", format!("index {index} assigned twice")));
            }
        }
        let index_to_word: Vec<String> = index_to_word.into_iter().map(|w| w.expect("bijection")).collect();
        Ok(Vocabulary {
            word_to_index: file.words.into_iter().collect(),
            index_to_word,
            capacity: file.capacity,
            total_distinct: file.total_distinct,
        })
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

    /// Hex SHA-256 of the canonical JSON form. Models record it so that
    /// artifacts fitted on different vocabularies are never mixed.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Exactly `max_len` indices, post-padded with zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    indices: Vec<usize>,
}

impl TokenSequence {
    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Builds a sequence from raw indices, checking range and the
    /// post-padding invariant.
    pub fn from_indices(indices: Vec<usize>, capacity: usize) -> Result<Self> {
        let seq = TokenSequence { indices };
        seq.check(capacity)?;
        Ok(seq)
    }

    pub fn check(&self, capacity: usize) -> Result<()> {
        if let Some(bad) = self.indices.iter().find(|&&i| i >= capacity) {
            return Err(Error::InvalidArgument(format!("index {bad} >= capacity {capacity}")));
        }
        if let Some(first_pad) = self.indices.iter().position(|&i| i == PAD_INDEX) {
            if self.indices[first_pad..].iter().any(|&i| i != PAD_INDEX) {
                return Err(Error::InvalidArgument("non-padding index after padding".into()));
            }
        }
        Ok(())
    }

    /// Number of positions before the padding starts.
    pub fn content_len(&self) -> usize {
        self.indices.iter().position(|&i| i == PAD_INDEX).unwrap_or(self.indices.len())
    }
}

/// Pads with zeros after the sentence, or keeps the first `max_len`
/// indices when the sentence is longer.
pub fn pad_sequence(indices: &[usize], max_len: usize) -> TokenSequence {
    let mut out = Vec::with_capacity(max_len);
    out.extend(indices.iter().take(max_len).copied());
    out.resize(max_len, PAD_INDEX);
    TokenSequence { indices: out }
}

/// The full text-to-sequence pipeline with a fitted vocabulary.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stopwords: StopwordList,
    pub vocabulary: Vocabulary,
    pub max_len: usize,
}

/// Normalize, split on whitespace and drop stopwords.
pub fn clean_tokens(text: &str, stopwords: &StopwordList) -> Vec<String> {
    remove_stopwords(&tokenize(&normalize(text)), stopwords)
}

impl Preprocessor {
    /// Fits the vocabulary on `texts` after cleaning.
    pub fn fit<S: AsRef<str>>(texts: &[S], stopwords: StopwordList, capacity: usize, max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be >= 1".into()));
        }
        let corpus: Vec<Vec<String>> = texts.iter().map(|t| clean_tokens(t.as_ref(), &stopwords)).collect();
        let vocabulary = fit_vocabulary(&corpus, capacity)?;
        Ok(Preprocessor { stopwords, vocabulary, max_len })
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        clean_tokens(text, &self.stopwords)
    }

    /// Encoded sentence without padding or truncation.
    pub fn encode_unpadded(&self, text: &str) -> Vec<usize> {
        self.vocabulary.encode(&self.tokens(text))
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        pad_sequence(&self.encode_unpadded(text), self.max_len)
    }
}
