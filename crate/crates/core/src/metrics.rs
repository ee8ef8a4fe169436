//! Confusion matrices and classification reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> usize {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Data(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Data(format!(
                "label at index {i} out of range (true {t}, predicted {p}, {n_classes} classes)"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// No row was predicted as this class, so precision is defined as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 from a confusion matrix. `labels`
/// names the classes; missing names fall back to the class index.
pub fn classification_report(confusion: &ConfusionMatrix, labels: &[String]) -> EvalReport {
    let c = confusion.n_classes();
    let n = confusion.total();
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|k| {
            let tp = confusion.counts[k][k];
            let predicted = confusion.col_sum(k);
            let support = confusion.row_sum(k);
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: labels.get(k).cloned().unwrap_or_else(|| k.to_string()),
                precision,
                recall,
                f1,
                support,
                precision_undefined: predicted == 0,
            }
        })
        .collect();
    let macro_f1 = if c == 0 {
        0.0
    } else {
        per_class.iter().map(|m| m.f1).sum::<f64>() / c as f64
    };
    let weighted_f1 = if n == 0 {
        0.0
    } else {
        per_class.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / n as f64
    };
    EvalReport {
        n,
        accuracy: ratio(confusion.trace(), n),
        per_class,
        macro_f1,
        weighted_f1,
        confusion: confusion.clone(),
    }
}

impl EvalReport {
    /// Plain-text report: per-class table, averages, then the confusion
    /// matrix with true classes down the side.
    pub fn render(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|m| m.label.len())
            .max()
            .unwrap_or(0)
            .max(12);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "class", "precision", "recall", "f1", "support"
        );
        for m in &self.per_class {
            let flag = if m.precision_undefined { "*" } else { " " };
            let _ = writeln!(
                s,
                "{:<width$}  {:>8.4}{flag}  {:>9.4}  {:>9.4}  {:>7}",
                m.label, m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<width$}  {:>9.4}  {:>31}", "accuracy", self.accuracy, self.n);
        let _ = writeln!(s, "{:<width$}  {:>31.4}", "macro f1", self.macro_f1);
        let _ = writeln!(s, "{:<width$}  {:>31.4}", "weighted f1", self.weighted_f1);
        if self.per_class.iter().any(|m| m.precision_undefined) {
            let _ = writeln!(s, "* class never predicted; precision set to 0");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion matrix (rows = true, columns = predicted)");
        let _ = write!(s, "{:<width$}", "");
        for m in &self.per_class {
            let _ = write!(s, "  {:>8}", truncate(&m.label, 8));
        }
        let _ = writeln!(s);
        for (m, row) in self.per_class.iter().zip(&self.confusion.counts) {
            let _ = write!(s, "{:<width$}", m.label);
            for v in row {
                let _ = write!(s, "  {v:>8}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
