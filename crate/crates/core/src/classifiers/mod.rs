//! Binary classifiers: L2 logistic regression, soft-margin SVM and random
//! forest. All take a dense design matrix and `{0, 1}` labels.

mod forest;
mod logistic;
mod svm;

pub use forest::{
    best_split, feature_importances, fit_forest, gini, predict_forest, DecisionTree, ForestConfig,
    ForestModel, Node, Split,
};
pub use logistic::{
    fit_lr, fit_lr_from, penalized_loss, predict_lr, predict_proba_lr, LogisticConfig,
    LogisticModel,
};
pub use svm::{fit_svm, Kernel, SvmConfig, SvmModel};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class loss weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    Uniform,
    /// `n / (2 * n_class)` for each class.
    Balanced,
}

impl ClassWeight {
    pub(crate) fn weights(self, y: &[u8]) -> [f64; 2] {
        match self {
            ClassWeight::Uniform => [1.0, 1.0],
            ClassWeight::Balanced => {
                let n1 = y.iter().filter(|&&l| l == 1).count();
                let n0 = y.len() - n1;
                let n = y.len() as f64;
                let w = |c: usize| if c == 0 { 0.0 } else { n / (2.0 * c as f64) };
                [w(n0), w(n1)]
            }
        }
    }
}

pub(crate) fn check_xy(x: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("training rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            what: "rows vs labels",
            left: x.nrows(),
            right: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "training features must be finite".into(),
        ));
    }
    Ok(())
}

pub(crate) fn check_both_classes(y: &[u8]) -> Result<()> {
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

pub(crate) fn check_width(x: ArrayView2<f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::LengthMismatch {
            what: "row width vs model width",
            left: x.ncols(),
            right: expected,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    Svm,
    Forest,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] =
        [ModelFamily::Logistic, ModelFamily::Svm, ModelFamily::Forest];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelFamily::Logistic => "LR",
            ModelFamily::Svm => "SVM",
            ModelFamily::Forest => "RF",
        }
    }
}

/// A fitted model of any family, or the constant fallback used when the
/// training rows hold a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Logistic(LogisticModel),
    Svm(SvmModel),
    Forest(ForestModel),
    Constant { label: u8, width: usize },
}

impl TrainedClassifier {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        match self {
            TrainedClassifier::Logistic(m) => predict_lr(m, x, 0.5),
            TrainedClassifier::Svm(m) => m.predict(x),
            TrainedClassifier::Forest(m) => predict_forest(m, x),
            TrainedClassifier::Constant { label, width } => {
                check_width(x, *width)?;
                Ok(vec![*label; x.nrows()])
            }
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, TrainedClassifier::Constant { .. })
    }

    /// Coefficients (LR, log-odds), primal weights (linear SVM) or impurity
    /// importances (RF). `None` where no per-feature summary exists.
    pub fn feature_summary(&self) -> Option<Vec<f64>> {
        match self {
            TrainedClassifier::Logistic(m) => Some(m.coefficients.clone()),
            TrainedClassifier::Svm(m) => m.primal_weights(),
            TrainedClassifier::Forest(m) => Some(m.importances.clone()),
            TrainedClassifier::Constant { .. } => None,
        }
    }
}
