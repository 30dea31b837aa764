//! Confusion matrices and imbalance-aware classification metrics.
//!
//! Conventions:
//! - any 0/0 ratio (precision with no positive predictions, F1 with P = R = 0)
//!   is 0;
//! - macro F1 is the unweighted mean of the per-class F1 scores, not the F1 of
//!   macro precision and macro recall;
//! - values are kept at full precision; [`round_half_up`] is for display only.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tp: self.tp + other.tp,
        }
    }

    /// Two-row block in the `True/Predict` layout.
    pub fn to_text_block(&self, model: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8}{:<14}{:>10}{:>10}",
            "Model", "True/Predict", "0", "1"
        );
        let _ = writeln!(
            s,
            "{:<8}{:<14}{:>10}{:>10}",
            "",
            "0",
            format!("{} (TN)", self.tn),
            format!("{} (FP)", self.fp)
        );
        let _ = writeln!(
            s,
            "{:<8}{:<14}{:>10}{:>10}",
            model,
            "1",
            format!("{} (FN)", self.fn_),
            format!("{} (TP)", self.tp)
        );
        s
    }
}

/// Counts outcomes of binary predictions against the truth.
pub fn confusion(truth: &[u8], pred: &[u8]) -> Result<ConfusionMatrix> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "truth vs predictions",
            left: truth.len(),
            right: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            (t, p) => return Err(Error::NonBinaryLabel(t.max(p))),
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub label0: ClassMetrics,
    pub label1: ClassMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    #[serde(rename = "micro")]
    pub micro_avg: Averages,
    #[serde(rename = "weighted")]
    pub weighted_avg: Averages,
    pub accuracy: f64,
    /// Recall of label 1.
    pub sensitivity: f64,
    /// Recall of label 0.
    pub specificity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Precision, Metric::Recall, Metric::F1];

    pub fn short_name(self) -> &'static str {
        match self {
            Metric::Precision => "Prec",
            Metric::Recall => "Rec",
            Metric::F1 => "F1",
        }
    }
}

/// Column of the score table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Macro,
    Micro,
    Weighted,
    Label0,
    Label1,
}

impl Aggregate {
    pub const ALL: [Aggregate; 5] = [
        Aggregate::Macro,
        Aggregate::Micro,
        Aggregate::Weighted,
        Aggregate::Label0,
        Aggregate::Label1,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Aggregate::Macro => "Macro",
            Aggregate::Micro => "Micro",
            Aggregate::Weighted => "Weighted",
            Aggregate::Label0 => "Label 0",
            Aggregate::Label1 => "Label 1",
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_metrics(hits: u64, predicted: u64, support: u64) -> ClassMetrics {
    let precision = ratio(hits, predicted);
    let recall = ratio(hits, support);
    ClassMetrics {
        precision,
        recall,
        f1: harmonic(precision, recall),
        support,
    }
}

/// Full metric set for one confusion matrix.
pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let label0 = class_metrics(cm.tn, cm.tn + cm.fn_, cm.tn + cm.fp);
    let label1 = class_metrics(cm.tp, cm.tp + cm.fp, cm.tp + cm.fn_);

    let macro_avg = Averages {
        precision: (label0.precision + label1.precision) / 2.0,
        recall: (label0.recall + label1.recall) / 2.0,
        f1: (label0.f1 + label1.f1) / 2.0,
    };

    // Every sample gets exactly one predicted label, so pooled TP over both
    // classes is the number of correct predictions and pooled FP = pooled FN.
    let correct = cm.tn + cm.tp;
    let micro_p = ratio(correct, n);
    let micro_r = ratio(correct, n);
    let micro_avg = Averages {
        precision: micro_p,
        recall: micro_r,
        f1: harmonic(micro_p, micro_r),
    };

    let w0 = label0.support as f64 / n as f64;
    let w1 = label1.support as f64 / n as f64;
    let weighted_avg = Averages {
        precision: w0 * label0.precision + w1 * label1.precision,
        recall: w0 * label0.recall + w1 * label1.recall,
        f1: w0 * label0.f1 + w1 * label1.f1,
    };

    Ok(ClassificationReport {
        confusion: *cm,
        label0,
        label1,
        macro_avg,
        micro_avg,
        weighted_avg,
        accuracy: ratio(correct, n),
        sensitivity: label1.recall,
        specificity: label0.recall,
    })
}

/// Metrics over predictions pooled across folds (concatenated in fold order).
pub fn pooled_metrics(truths: &[Vec<u8>], preds: &[Vec<u8>]) -> Result<ClassificationReport> {
    if truths.len() != preds.len() {
        return Err(Error::LengthMismatch {
            what: "truth folds vs prediction folds",
            left: truths.len(),
            right: preds.len(),
        });
    }
    let truth: Vec<u8> = truths.concat();
    let pred: Vec<u8> = preds.concat();
    report(&confusion(&truth, &pred)?)
}

impl ClassificationReport {
    pub fn cell(&self, metric: Metric, column: Aggregate) -> f64 {
        let pick_avg = |a: &Averages| match metric {
            Metric::Precision => a.precision,
            Metric::Recall => a.recall,
            Metric::F1 => a.f1,
        };
        let pick_class = |c: &ClassMetrics| match metric {
            Metric::Precision => c.precision,
            Metric::Recall => c.recall,
            Metric::F1 => c.f1,
        };
        match column {
            Aggregate::Macro => pick_avg(&self.macro_avg),
            Aggregate::Micro => pick_avg(&self.micro_avg),
            Aggregate::Weighted => pick_avg(&self.weighted_avg),
            Aggregate::Label0 => pick_class(&self.label0),
            Aggregate::Label1 => pick_class(&self.label1),
        }
    }

    pub fn text_header() -> String {
        let mut s = format!("{:<8}{:<8}", "Model", "Metric");
        for col in Aggregate::ALL {
            let _ = write!(s, "{:>10}", col.header());
        }
        s
    }

    /// Three rows (Prec, Rec, F1) rounded half-up to two decimals.
    pub fn text_rows(&self, model: &str) -> String {
        let mut s = String::new();
        for (i, metric) in Metric::ALL.into_iter().enumerate() {
            let name = if i == 0 { model } else { "" };
            let _ = write!(s, "{:<8}{:<8}", name, metric.short_name());
            for col in Aggregate::ALL {
                let _ = write!(s, "{:>10}", format_2dp(self.cell(metric, col)));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text_table(&self, model: &str) -> String {
        format!("{}\n{}", Self::text_header(), self.text_rows(model))
    }
}

/// Rounds half away from zero at `decimals` places. Values within 1e-9 of a
/// tie are treated as ties so that e.g. 0.125 rounds up despite its binary
/// representation.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    let scaled = x.abs() * factor;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if frac >= 0.5 - 1e-9 {
        floor + 1.0
    } else {
        floor
    };
    (rounded / factor).copysign(x)
}

pub fn format_2dp(x: f64) -> String {
    format!("{:.2}", round_half_up(x, 2))
}
