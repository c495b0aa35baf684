//! Loading, validating, summarising and splitting the labeled comment dataset.
//!
//! The dataset is a UTF-8 CSV file with a header row naming the columns
//! `comment`, `category`, `gender`, `react` and `label`. Header names are
//! matched case-insensitively and columns are located by name, so their
//! order in the file does not matter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five harassment classes, with stable integer codes 0..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    NonBully = 0,
    Sexual = 1,
    Threat = 2,
    Troll = 3,
    Religious = 4,
}

impl ClassLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [ClassLabel; 5] =
        [ClassLabel::NonBully, ClassLabel::Sexual, ClassLabel::Threat, ClassLabel::Troll, ClassLabel::Religious];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::NonBully => "not bully",
            ClassLabel::Sexual => "sexual",
            ClassLabel::Threat => "threat",
            ClassLabel::Troll => "troll",
            ClassLabel::Religious => "religious",
        }
    }

    /// Collapses the five classes onto bully / not bully.
    pub fn to_binary(self) -> BinaryLabel {
        to_binary_label(self)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lowercases and drops everything except ASCII alphanumerics, so that
/// "Not Bully", "non-bully" and "not_bully" compare equal.
fn fold_key(s: &str) -> String {
    s.trim().chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_key(s).as_str() {
            "nonbully" | "notbully" | "none" | "0" => Ok(ClassLabel::NonBully),
            "sexual" | "1" => Ok(ClassLabel::Sexual),
            "threat" | "2" => Ok(ClassLabel::Threat),
            "troll" | "3" => Ok(ClassLabel::Troll),
            "religious" | "4" => Ok(ClassLabel::Religious),
            _ => Err(format!("unknown label {:?}", s.trim())),
        }
    }
}

/// Binary target: codes 0 (not bully) and 1 (bully).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    NotBully = 0,
    Bully = 1,
}

impl BinaryLabel {
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryLabel::NotBully => "not bully",
            BinaryLabel::Bully => "bully",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every harassment class maps to `Bully`; only `NonBully` stays `NotBully`.
pub fn to_binary_label(label: ClassLabel) -> BinaryLabel {
    match label {
        ClassLabel::NonBully => BinaryLabel::NotBully,
        ClassLabel::Sexual | ClassLabel::Threat | ClassLabel::Troll | ClassLabel::Religious => BinaryLabel::Bully,
    }
}

/// Occupation of the person a comment is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    SocialInfluencer,
    Politician,
    Athlete,
    Singer,
    Actor,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::SocialInfluencer, Category::Politician, Category::Athlete, Category::Singer, Category::Actor];

    pub fn name(self) -> &'static str {
        match self {
            Category::SocialInfluencer => "social influencer",
            Category::Politician => "politician",
            Category::Athlete => "athlete",
            Category::Singer => "singer",
            Category::Actor => "actor",
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_key(s).as_str() {
            "socialinfluencer" | "social" | "influencer" => Ok(Category::SocialInfluencer),
            "politician" | "politics" => Ok(Category::Politician),
            "athlete" | "sports" | "sport" | "sportsman" => Ok(Category::Athlete),
            "singer" => Ok(Category::Singer),
            "actor" | "actress" => Ok(Category::Actor),
            _ => Err(format!("unknown category {:?}", s.trim())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_key(s).as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            _ => Err(format!("unknown gender {:?}", s.trim())),
        }
    }
}

/// One labeled social-media comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    pub category: Category,
    pub gender: Gender,
    pub reacts: u64,
    pub label: ClassLabel,
}

const COLUMNS: [&str; 5] = ["comment", "category", "gender", "react", "label"];

/// Reads the dataset CSV at `path`.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Comment>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file)
}

/// Parses a dataset from any reader. Row numbers in errors are 1-based
/// file line numbers, so the header is line 1 and the first record line 2.
pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Vec<Comment>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Header(e.to_string()))?.clone();
    let mut position = [usize::MAX; 5];
    for (idx, name) in headers.iter().enumerate() {
        let name = name.trim().trim_start_matches('\u{feff}').to_lowercase();
        if let Some(col) = COLUMNS.iter().position(|c| *c == name) {
            position[col] = idx;
        }
    }
    if let Some(missing) = COLUMNS.iter().zip(position).find(|(_, p)| *p == usize::MAX) {
        return Err(Error::Header(format!(
            "missing column {:?} (found {:?})",
            missing.0,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let width = headers.len();

    let mut comments = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = record.as_ref().ok().and_then(|r| r.position()).map(|p| p.line() as usize).unwrap_or(i + 2);
        let record = record.map_err(|e| Error::Row { row, message: e.to_string() })?;
        if record.len() != width {
            return Err(Error::Row { row, message: format!("expected {width} columns, found {}", record.len()) });
        }
        let field = |col: usize| record.get(position[col]).unwrap_or("");
        let bad = |message: String| Error::Row { row, message };

        let text = field(0).trim();
        if text.is_empty() {
            return Err(bad("empty comment".into()));
        }
        let category = field(1).parse::<Category>().map_err(bad)?;
        let gender = field(2).parse::<Gender>().map_err(bad)?;
        let reacts = parse_reacts(field(3))
            .ok_or_else(|| Error::Row { row, message: format!("invalid react count {:?}", field(3).trim()) })?;
        let label = field(4).parse::<ClassLabel>().map_err(bad)?;
        comments.push(Comment { text: text.to_string(), category, gender, reacts, label });
    }
    Ok(comments)
}

// Some exports write counts as "12.0".
fn parse_reacts(s: &str) -> Option<u64> {
    let s = s.trim();
    if s.is_empty() {
        return Some(0);
    }
    if let Ok(n) = s.parse::<u64>() {
        return Some(n);
    }
    let f = s.parse::<f64>().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f.is_finite()).then_some(f as u64)
}

/// Writes comments in the dataset CSV layout.
pub fn write_dataset<W: std::io::Write>(writer: W, comments: &[Comment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let map = |e: csv::Error| Error::format("dataset", e);
    wtr.write_record(COLUMNS).map_err(map)?;
    for c in comments {
        wtr.write_record([c.text.as_str(), c.category.name(), c.gender.name(), &c.reacts.to_string(), c.label.name()])
            .map_err(map)?;
    }
    wtr.flush().map_err(|e| Error::format("dataset", e))?;
    Ok(())
}

/// Exact counts over the dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_label: BTreeMap<ClassLabel, usize>,
    pub per_gender: BTreeMap<Gender, usize>,
    pub per_category: BTreeMap<Category, usize>,
}

impl CorpusStats {
    pub fn fraction(count: usize, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        }
    }

    pub fn label_fraction(&self, label: ClassLabel) -> f64 {
        Self::fraction(self.per_label.get(&label).copied().unwrap_or(0), self.total)
    }

    pub fn gender_fraction(&self, gender: Gender) -> f64 {
        Self::fraction(self.per_gender.get(&gender).copied().unwrap_or(0), self.total)
    }

    pub fn category_fraction(&self, category: Category) -> f64 {
        Self::fraction(self.per_category.get(&category).copied().unwrap_or(0), self.total)
    }
}

pub fn corpus_stats(dataset: &[Comment]) -> CorpusStats {
    let mut stats = CorpusStats { total: dataset.len(), ..Default::default() };
    for c in dataset {
        *stats.per_label.entry(c.label).or_default() += 1;
        *stats.per_gender.entry(c.gender).or_default() += 1;
        *stats.per_category.entry(c.category).or_default() += 1;
    }
    stats
}

/// How to partition a dataset into training and validation parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, seed: 42, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    let k = (fraction * n as f64).round() as usize;
    if n >= 2 {
        k.clamp(1, n - 1)
    } else {
        k.min(n)
    }
}

/// Partitions positions `0..labels.len()` into (train, validation) index
/// lists, each in ascending order.
///
/// With stratification every class is shuffled and cut separately, so each
/// class contributes `round(fraction * size)` items to the training side.
pub fn split_indices(labels: &[ClassLabel], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut validation = Vec::new();

    if spec.stratified {
        let mut groups: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
        for (i, &label) in labels.iter().enumerate() {
            groups.entry(label).or_default().push(i);
        }
        for (label, members) in &groups {
            if members.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "class {label} has {} member(s); stratified splitting needs at least 2",
                    members.len()
                )));
            }
        }
        for (_, mut members) in groups {
            members.shuffle(&mut rng);
            let k = train_count(members.len(), spec.train_fraction);
            train.extend_from_slice(&members[..k]);
            validation.extend_from_slice(&members[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        let k = train_count(all.len(), spec.train_fraction);
        train.extend_from_slice(&all[..k]);
        validation.extend_from_slice(&all[k..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok((train, validation))
}

/// Splits comments into (train, validation) lists that keep dataset order.
pub fn stratified_split(dataset: &[Comment], spec: &SplitSpec) -> Result<(Vec<Comment>, Vec<Comment>)> {
    let labels: Vec<ClassLabel> = dataset.iter().map(|c| c.label).collect();
    let (train, validation) = split_indices(&labels, spec)?;
    Ok((
        train.into_iter().map(|i| dataset[i].clone()).collect(),
        validation.into_iter().map(|i| dataset[i].clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comment(label: ClassLabel) -> Comment {
        Comment { text: "x".into(), category: Category::Actor, gender: Gender::Female, reacts: 0, label }
    }

    #[test]
    fn parses_table_row() {
        let csv = "comment,category,gender,react,label\n\"এভাবে, না\",Actor,female,3,sexual\n";
        let rows = read_dataset(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].label, ClassLabel::Sexual);
        assert_eq!(rows[0].gender, Gender::Female);
        assert_eq!(rows[0].text, "এভাবে, না");
        assert_eq!(rows[0].reacts, 3);
    }

    #[test]
    fn header_only_is_empty() {
        let rows = read_dataset("comment,category,gender,react,label\n".as_bytes()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn columns_located_by_header_name() {
        let csv = "Label,React,Comment,Gender,Category\nNot Bully,0,ভালো,Male,Singer\n";
        let rows = read_dataset(csv.as_bytes()).unwrap();
        assert_eq!(rows[0].label, ClassLabel::NonBully);
        assert_eq!(rows[0].category, Category::Singer);
        assert_eq!(rows[0].text, "ভালো");
    }

    #[test]
    fn unknown_label_names_row_and_value() {
        let csv = "comment,category,gender,react,label\na,actor,male,1,troll\nb,actor,male,1,abusive\n";
        let err = read_dataset(csv.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Row { row: 3, .. }), "{msg}");
        assert!(msg.contains("abusive"), "{msg}");
    }

    #[test]
    fn wrong_column_count_is_rejected() {
        let csv = "comment,category,gender,react,label\na,actor,male,1\n";
        assert!(matches!(read_dataset(csv.as_bytes()), Err(Error::Row { row: 2, .. })));
    }

    #[test]
    fn missing_header_column() {
        let csv = "comment,category,gender,label\n";
        assert!(matches!(read_dataset(csv.as_bytes()), Err(Error::Header(_))));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_dataset("/nonexistent/data.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn binary_collapse() {
        assert_eq!(to_binary_label(ClassLabel::Sexual), BinaryLabel::Bully);
        assert_eq!(to_binary_label(ClassLabel::NonBully), BinaryLabel::NotBully);
        let bullies = ClassLabel::ALL.iter().filter(|l| to_binary_label(**l) == BinaryLabel::Bully).count();
        assert_eq!(bullies, 4);
    }

    #[test]
    fn label_codes_are_stable() {
        for (i, l) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(l.code(), i);
            assert_eq!(ClassLabel::from_code(i), Some(*l));
        }
    }

    #[test]
    fn split_ten_items() {
        let data: Vec<_> = (0..10).map(|_| comment(ClassLabel::NonBully)).collect();
        let spec = SplitSpec { train_fraction: 0.8, seed: 7, stratified: false };
        let (train, val) = stratified_split(&data, &spec).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
    }

    #[test]
    fn stratified_counts() {
        let labels: Vec<_> = (0..100).map(|i| if i < 60 { ClassLabel::NonBully } else { ClassLabel::Troll }).collect();
        let (train, _) = split_indices(&labels, &SplitSpec::default()).unwrap();
        let non = train.iter().filter(|&&i| labels[i] == ClassLabel::NonBully).count();
        let troll = train.iter().filter(|&&i| labels[i] == ClassLabel::Troll).count();
        assert_eq!((non, troll), (48, 32));
    }

    #[test]
    fn singleton_class_rejected_when_stratified() {
        let labels = [ClassLabel::NonBully, ClassLabel::NonBully, ClassLabel::Threat];
        assert!(split_indices(&labels, &SplitSpec::default()).is_err());
    }

    #[test]
    fn bad_fraction_rejected() {
        let spec = SplitSpec { train_fraction: 1.0, ..SplitSpec::default() };
        assert!(split_indices(&[ClassLabel::Troll; 4], &spec).is_err());
    }

    #[test]
    fn empty_stats() {
        let s = corpus_stats(&[]);
        assert_eq!(s.total, 0);
        assert!(s.per_label.is_empty() && s.per_gender.is_empty() && s.per_category.is_empty());
    }

    fn arb_label() -> impl Strategy<Value = ClassLabel> {
        (0usize..5).prop_map(|c| ClassLabel::from_code(c).unwrap())
    }

    proptest! {
        #[test]
        fn split_is_a_partition(labels in prop::collection::vec(arb_label(), 1..200),
                                seed in any::<u64>(), fraction in 0.05f64..0.95) {
            let spec = SplitSpec { train_fraction: fraction, seed, stratified: false };
            let (train, val) = split_indices(&labels, &spec).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            prop_assert_eq!(split_indices(&labels, &spec).unwrap(), (train, val));
        }

        #[test]
        fn stratified_shares_within_one(labels in prop::collection::vec(arb_label(), 2..300),
                                        seed in any::<u64>(), fraction in 0.05f64..0.95) {
            let spec = SplitSpec { train_fraction: fraction, seed, stratified: true };
            match split_indices(&labels, &spec) {
                Err(_) => {
                    // some class was a singleton
                    prop_assert!(ClassLabel::ALL.iter().any(|l| labels.iter().filter(|x| *x == l).count() == 1));
                }
                Ok((train, val)) => {
                    prop_assert_eq!(train.len() + val.len(), labels.len());
                    for l in ClassLabel::ALL {
                        let size = labels.iter().filter(|x| **x == l).count();
                        let got = train.iter().filter(|&&i| labels[i] == l).count() as f64;
                        prop_assert!((got - fraction * size as f64).abs() <= 1.0);
                    }
                }
            }
        }

        #[test]
        fn stats_marginals_sum_to_total(codes in prop::collection::vec((0usize..5, 0usize..2, 0usize..5), 0..100)) {
            let data: Vec<Comment> = codes.iter().map(|&(l, g, c)| Comment {
                text: "t".into(),
                category: Category::ALL[c],
                gender: if g == 0 { Gender::Male } else { Gender::Female },
                reacts: 1,
                label: ClassLabel::ALL[l],
            }).collect();
            let s = corpus_stats(&data);
            prop_assert_eq!(s.per_label.values().sum::<usize>(), s.total);
            prop_assert_eq!(s.per_gender.values().sum::<usize>(), s.total);
            prop_assert_eq!(s.per_category.values().sum::<usize>(), s.total);
        }
    }
}
