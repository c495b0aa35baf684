//! Confusion matrices and precision / recall / F1 reports.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!("{} true labels but {} predictions", truth.len(), predicted.len())));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        if t >= classes || p >= classes {
            return Err(Error::InvalidArgument(format!("example {i}: label pair ({t}, {p}) outside 0..{classes}")));
        }
        counts[t][p] += 1;
    }
    let class_names = (0..classes).map(|c| c.to_string()).collect();
    Ok(ConfusionMatrix { class_names, counts })
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix { class_names: (0..c).map(|i| i.to_string()).collect(), counts })
    }

    pub fn with_names<S: ToString>(mut self, names: &[S]) -> Result<Self> {
        if names.len() != self.classes() {
            return Err(Error::Shape(format!("{} names for {} classes", names.len(), self.classes())));
        }
        self.class_names = names.iter().map(ToString::to_string).collect();
        Ok(self)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Examples whose true class is `class`.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Each row divided by its sum, so entry `[i][j]` is the share of
    /// class `i` predicted as `j`. Empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter().map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 }).collect()
            })
            .collect()
    }

    pub fn to_csv(&self, normalized: bool) -> String {
        let mut out = String::from("true\\predicted");
        for name in &self.class_names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        let fractions = self.row_normalized();
        for (i, name) in self.class_names.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.classes() {
                if normalized {
                    let _ = write!(out, ",{:.4}", fractions[i][j]);
                } else {
                    let _ = write!(out, ",{}", self.counts[i][j]);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned table; with `normalized`, row percentages to 2 decimals.
    pub fn to_text(&self, normalized: bool) -> String {
        let fractions = self.row_normalized();
        let cells: Vec<Vec<String>> = (0..self.classes())
            .map(|i| {
                (0..self.classes())
                    .map(|j| {
                        if normalized {
                            format!("{:.2}%", 100.0 * fractions[i][j])
                        } else {
                            self.counts[i][j].to_string()
                        }
                    })
                    .collect()
            })
            .collect();
        let label_w = self.class_names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(4);
        let col_w = cells
            .iter()
            .flatten()
            .map(String::len)
            .chain(self.class_names.iter().map(|n| n.chars().count()))
            .max()
            .unwrap_or(1);
        let mut out = format!("{:label_w$}", "");
        for name in &self.class_names {
            let _ = write!(out, "  {}", pad_left(name, col_w));
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&cells) {
            out.push_str(&pad_right(name, label_w));
            for cell in row {
                let _ = write!(out, "  {}", pad_left(cell, col_w));
            }
            out.push('\n');
        }
        out
    }
}

fn pad_left(s: &str, width: usize) -> String {
    format!("{}{s}", " ".repeat(width.saturating_sub(s.chars().count())))
}

fn pad_right(s: &str, width: usize) -> String {
    format!("{s}{}", " ".repeat(width.saturating_sub(s.chars().count())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub total: u64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64, undefined: &mut Vec<String>, what: &str, class: &str) -> f64 {
    if den == 0 {
        undefined.push(format!("{what} of {class}"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn class_report(matrix: &ConfusionMatrix) -> Result<ClassReport> {
    let total = matrix.total();
    if matrix.classes() == 0 || total == 0 {
        return Err(Error::InvalidArgument("class report of an empty confusion matrix".into()));
    }
    let mut undefined = Vec::new();
    let classes: Vec<ClassMetrics> = (0..matrix.classes())
        .map(|c| {
            let name = &matrix.class_names[c];
            let tp = matrix.count(c, c);
            let precision = ratio(tp, matrix.predicted(c), &mut undefined, "precision", name);
            let recall = ratio(tp, matrix.support(c), &mut undefined, "recall", name);
            ClassMetrics {
                name: name.clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: matrix.support(c),
            }
        })
        .collect();
    if !undefined.is_empty() {
        warn!("zero denominator, reported as 0: {}", undefined.join(", "));
    }
    let n = classes.len() as f64;
    let macro_avg = Averages {
        precision: classes.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: classes.iter().map(|c| c.recall).sum::<f64>() / n,
        f1: classes.iter().map(|c| c.f1).sum::<f64>() / n,
    };
    let w = |f: fn(&ClassMetrics) -> f64| classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64;
    let weighted_avg = Averages { precision: w(|c| c.precision), recall: w(|c| c.recall), f1: w(|c| c.f1) };
    Ok(ClassReport { classes, macro_avg, weighted_avg, accuracy: matrix.trace() as f64 / total as f64, total })
}

impl ClassReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1_score,support\n");
        for c in &self.classes {
            let _ = writeln!(out, "{},{:.4},{:.4},{:.4},{}", c.name, c.precision, c.recall, c.f1, c.support);
        }
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(out, "{name},{:.4},{:.4},{:.4},{}", a.precision, a.recall, a.f1, self.total);
        }
        let _ = writeln!(out, "accuracy,,,{:.4},{}", self.accuracy, self.total);
        out
    }

    pub fn to_text(&self) -> String {
        let label_w =
            self.classes.iter().map(|c| c.name.chars().count()).chain(["weighted avg".len()]).max().unwrap_or(0);
        let mut out = format!(
            "{}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            pad_right("", label_w),
            "precision",
            "recall",
            "f1-score",
            "support"
        );
        let line = |name: &str, p: f64, r: f64, f: f64, s: u64| {
            format!("{}  {p:>9.2}  {r:>9.2}  {f:>9.2}  {s:>9}\n", pad_right(name, label_w))
        };
        for c in &self.classes {
            out.push_str(&line(&c.name, c.precision, c.recall, c.f1, c.support));
        }
        out.push('\n');
        out.push_str(&line(
            "macro avg",
            self.macro_avg.precision,
            self.macro_avg.recall,
            self.macro_avg.f1,
            self.total,
        ));
        out.push_str(&line(
            "weighted avg",
            self.weighted_avg.precision,
            self.weighted_avg.recall,
            self.weighted_avg.f1,
            self.total,
        ));
        let _ = writeln!(out, "{}  accuracy {:.2}%", pad_right("", label_w), 100.0 * self.accuracy);
        out
    }
}

/// Fraction of positions where the two lists agree.
pub fn accuracy<L: PartialEq>(truth: &[L], predicted: &[L]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!("{} true labels but {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty list".into()));
    }
    Ok(truth.iter().zip(predicted).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_off_diagonal() {
        let m = confusion_matrix(&[0], &[1], 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.count(i, j), u64::from((i, j) == (0, 1)));
            }
        }
        assert!(confusion_matrix(&[0, 1], &[0], 2).is_err());
        assert!(confusion_matrix(&[3], &[0], 3).is_err());
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1, 0, 0];
        let m = confusion_matrix(&y, &y, 3).unwrap();
        assert_eq!(m.trace(), m.total());
        assert_eq!(m.support(0), 3);
    }

    #[test]
    fn f1_reference_values() {
        assert!((f1_score(0.90, 0.50) - 0.6429).abs() < 1e-4);
        assert!((f1_score(0.90, 0.75) - 0.8182).abs() < 1e-4);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn empty_column_gives_zero_precision() {
        let m = confusion_matrix(&[0, 1, 2], &[0, 0, 0], 3).unwrap();
        let r = class_report(&m).unwrap();
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[1].f1, 0.0);
        assert!(class_report(&ConfusionMatrix::from_counts(vec![vec![0]]).unwrap()).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 3], &[0, 0, 0]).unwrap(), 0.0);
        let t = vec![1u8; 10000];
        let p: Vec<u8> = (0..10000).map(|i| u8::from(i < 8791)).collect();
        assert_eq!(accuracy(&t, &p).unwrap(), 0.8791);
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }

    #[test]
    fn normalized_rows_sum_to_one() {
        let m = confusion_matrix(&[0, 0, 1, 1, 1], &[0, 1, 1, 1, 0], 3).unwrap();
        let n = m.row_normalized();
        assert!((n[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(n[2], vec![0.0; 3]);
        assert!(m.to_text(true).contains("66.67%"));
    }

    proptest! {
        #[test]
        fn report_rows_follow_class_permutation(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let a = class_report(&confusion_matrix(&t, &p, 4).unwrap()).unwrap();
            let tp: Vec<_> = t.iter().map(|&x| perm[x]).collect();
            let pp: Vec<_> = p.iter().map(|&x| perm[x]).collect();
            let b = class_report(&confusion_matrix(&tp, &pp, 4).unwrap()).unwrap();
            for c in 0..4 {
                let (x, y) = (&a.classes[c], &b.classes[perm[c]]);
                prop_assert_eq!((x.precision, x.recall, x.f1, x.support), (y.precision, y.recall, y.f1, y.support));
            }
            prop_assert_eq!(a.accuracy, b.accuracy);
        }
    }
}
