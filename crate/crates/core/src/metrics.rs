//! Confusion-matrix bookkeeping and the derived metric set.
//!
//! All scores live in `[0, 1]`; undefined `0/0` cases are defined as 0 so
//! that ignored minority classes drag macro averages down instead of being
//! silently skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    /// `counts[i][j]` = samples with true class `i` predicted as class `j`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Samples predicted as class `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        self.predicted(c) - self.counts[c][c]
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        self.support(c) - self.counts[c][c]
    }

    pub fn true_negatives(&self, c: usize) -> u64 {
        self.total() - self.support(c) - self.false_positives(c)
    }
}

/// Count a confusion matrix from parallel truth/prediction vectors.
pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    confusion_named(
        y_true,
        y_pred,
        &(0..n_classes).map(|c| c.to_string()).collect::<Vec<_>>(),
    )
}

pub fn confusion_named(
    y_true: &[usize],
    y_pred: &[usize],
    class_names: &[String],
) -> Result<ConfusionMatrix> {
    if y_true.is_empty() {
        return Err(Error::input("cannot score an empty prediction set"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::input(format!(
            "length mismatch: {} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n = class_names.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n || p >= n {
            return Err(Error::input(format!(
                "class index out of range: true={t} pred={p} n_classes={n}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

/// Scores of a single positive class in a two-class matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn binary_metrics(cm: &ConfusionMatrix, positive: usize) -> Result<BinaryMetrics> {
    if cm.n_classes() != 2 {
        return Err(Error::input(format!(
            "binary metrics need a 2-class matrix, got {}",
            cm.n_classes()
        )));
    }
    let tp = cm.true_positives(positive);
    let fp = cm.false_positives(positive);
    let fn_ = cm.false_negatives(positive);
    let tn = cm.true_negatives(positive);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(BinaryMetrics {
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        precision,
        recall,
        fpr: ratio(fp, fp + tn),
        f1: f1_of(precision, recall),
    })
}

/// Per-class one-vs-rest scores plus their unweighted (macro) means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub class_names: Vec<String>,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub fpr: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_fpr: f64,
    pub macro_f1: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// One-vs-rest metrics per class, macro-averaged over every class in the
/// matrix. Accuracy stays global.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let n = cm.n_classes();
    if n < 2 {
        return Err(Error::input("macro metrics need at least 2 classes"));
    }
    let mut precision = Vec::with_capacity(n);
    let mut recall = Vec::with_capacity(n);
    let mut fpr = Vec::with_capacity(n);
    let mut f1 = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.true_positives(c);
        let fp = cm.false_positives(c);
        let fn_ = cm.false_negatives(c);
        let tn = cm.true_negatives(c);
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        precision.push(p);
        recall.push(r);
        fpr.push(ratio(fp, fp + tn));
        f1.push(f1_of(p, r));
    }
    let correct: u64 = (0..n).map(|c| cm.counts[c][c]).sum();
    Ok(MetricReport {
        class_names: cm.class_names.clone(),
        accuracy: ratio(correct, cm.total()),
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_fpr: mean(&fpr),
        macro_f1: mean(&f1),
        precision,
        recall,
        fpr,
        f1,
    })
}

/// Macro-F1 restricted to classes that actually occur in the truth vector.
///
/// Used when scoring cross-validation folds: a fold that happens to contain
/// no sample of some rare class should not charge the model an F1 of 0 for
/// it. The full-matrix [`macro_metrics`] is unaffected.
pub fn macro_f1_present(cm: &ConfusionMatrix) -> Result<f64> {
    let report = macro_metrics(cm)?;
    let present: Vec<f64> = (0..cm.n_classes())
        .filter(|&c| cm.support(c) > 0)
        .map(|c| report.f1[c])
        .collect();
    Ok(mean(&present))
}

impl MetricReport {
    /// Element-wise mean of several reports (used for cross-validation folds).
    pub fn mean_of(reports: &[MetricReport]) -> Option<MetricReport> {
        let first = reports.first()?;
        let n = first.class_names.len();
        let k = reports.len() as f64;
        let avg_vec = |get: &dyn Fn(&MetricReport) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|c| reports.iter().map(|r| get(r)[c]).sum::<f64>() / k)
                .collect()
        };
        Some(MetricReport {
            class_names: first.class_names.clone(),
            accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / k,
            precision: avg_vec(&|r| &r.precision),
            recall: avg_vec(&|r| &r.recall),
            fpr: avg_vec(&|r| &r.fpr),
            f1: avg_vec(&|r| &r.f1),
            macro_precision: reports.iter().map(|r| r.macro_precision).sum::<f64>() / k,
            macro_recall: reports.iter().map(|r| r.macro_recall).sum::<f64>() / k,
            macro_fpr: reports.iter().map(|r| r.macro_fpr).sum::<f64>() / k,
            macro_f1: reports.iter().map(|r| r.macro_f1).sum::<f64>() / k,
        })
    }
}
