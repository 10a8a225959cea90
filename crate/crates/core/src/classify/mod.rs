//! Self-contained binary classifiers.
//!
//! Three interchangeable backends share one interface: logistic regression,
//! a single decision tree, and gradient-boosted trees. Fitting is
//! deterministic for a fixed spec and training set; fitted models are
//! immutable and can score from several threads at once.

pub mod logistic;
pub mod tree;

use std::fmt;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use logistic::{LogisticModel, LogisticParams};
pub use tree::{GbtParams, TreeEnsemble, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression(LogisticParams),
    DecisionTree(TreeParams),
    GradientBoostedTrees(GbtParams),
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression(_) => "logistic",
            ClassifierKind::DecisionTree(_) => "tree",
            ClassifierKind::GradientBoostedTrees(_) => "gbt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub kind: ClassifierKind,
    /// Reserved for stochastic backends; the shipped backends are
    /// deterministic and ignore it.
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn logistic() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::LogisticRegression(LogisticParams::default()),
            seed: 0,
        }
    }

    pub fn decision_tree(max_depth: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::DecisionTree(TreeParams {
                max_depth,
                ..TreeParams::default()
            }),
            seed: 0,
        }
    }

    pub fn gbt() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::GradientBoostedTrees(GbtParams::default()),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ClassifierKind::LogisticRegression(p) => p.validate(),
            ClassifierKind::DecisionTree(p) => p.validate(),
            ClassifierKind::GradientBoostedTrees(p) => p.validate(),
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted<T> {
    Logistic(LogisticModel<T>),
    Trees(TreeEnsemble<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel<T> {
    pub spec: ClassifierSpec,
    pub feature_dim: usize,
    pub fitted: Fitted<T>,
}

impl<T: Scalar> ClassifierModel<T> {
    /// Logistic model with fixed raw-space coefficients, scoring
    /// `sigmoid(a.x + b)`.
    pub fn logistic(weights: Array1<T>, intercept: T) -> Self {
        ClassifierModel {
            spec: ClassifierSpec::logistic(),
            feature_dim: weights.len(),
            fitted: Fitted::Logistic(LogisticModel::from_coefficients(weights, intercept)),
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticModel<T>> {
        match &self.fitted {
            Fitted::Logistic(m) => Some(m),
            Fitted::Trees(_) => None,
        }
    }

    fn check_width(&self, features: &ArrayView2<'_, T>) -> Result<()> {
        if features.ncols() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: features.ncols(),
            });
        }
        Ok(())
    }
}

pub fn fit<T: Scalar>(spec: &ClassifierSpec, train: &TabularDataset<T>) -> Result<ClassifierModel<T>> {
    fit_matrix(spec, train.features(), train.labels())
}

pub fn fit_matrix<T: Scalar>(spec: &ClassifierSpec, x: ArrayView2<'_, T>, y: &[u8]) -> Result<ClassifierModel<T>> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(x.nrows(), y.len()));
    }
    let fitted = match &spec.kind {
        ClassifierKind::LogisticRegression(p) => Fitted::Logistic(logistic::fit(p, x, y)?),
        ClassifierKind::DecisionTree(p) => Fitted::Trees(tree::fit_decision_tree(p, x, y)?),
        ClassifierKind::GradientBoostedTrees(p) => Fitted::Trees(tree::fit_gbt(p, x, y)?),
    };
    Ok(ClassifierModel {
        spec: *spec,
        feature_dim: x.ncols(),
        fitted,
    })
}

/// One score in `[0, 1]` per row.
pub fn predict_proba<T: Scalar>(model: &ClassifierModel<T>, features: ArrayView2<'_, T>) -> Result<Vec<T>> {
    model.check_width(&features)?;
    Ok(match &model.fitted {
        Fitted::Logistic(m) => m.predict_proba(features),
        Fitted::Trees(m) => m.predict_proba(features),
    })
}

/// Hard labels: 1 exactly where the score strictly exceeds `threshold`.
pub fn predict<T: Scalar>(model: &ClassifierModel<T>, features: ArrayView2<'_, T>, threshold: f64) -> Result<Vec<u8>> {
    Ok(threshold_scores(&predict_proba(model, features)?, threshold))
}

pub fn threshold_scores<T: Scalar>(scores: &[T], threshold: f64) -> Vec<u8> {
    let t = T::of(threshold);
    scores.iter().map(|&s| u8::from(s > t)).collect()
}
