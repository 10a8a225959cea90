//! Full-batch gradient-descent logistic regression with L2 penalty.
//!
//! Features are standardized with statistics from the training data; the
//! fitted weights live in that standardized space and are mapped back to raw
//! feature space by [`LogisticModel::coefficients`].

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub standardize: bool,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            standardize: true,
        }
    }
}

impl LogisticParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || !(self.l2 >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "logistic parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    /// Weights on standardized features.
    pub weights: Array1<T>,
    pub intercept: T,
    pub mean: Array1<T>,
    pub scale: Array1<T>,
    /// Penalized loss before the first update and after every epoch.
    pub loss_history: Vec<T>,
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2/2 * |w|^2`, and its gradient with
/// respect to `(w, b)`.
pub fn loss_and_gradient<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: &[u8],
    weights: ArrayView1<'_, T>,
    intercept: T,
    l2: T,
) -> (T, Array1<T>, T) {
    let n = T::of(x.nrows() as f64);
    let mut loss = T::zero();
    let mut grad_sum = Array1::zeros(weights.len());
    let mut grad_b = T::zero();
    // One pass over rows: score, loss term and gradient contribution.
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let zi = row.dot(&weights) + intercept;
        let yi = if yi == 1 { T::one() } else { T::zero() };
        loss = loss + softplus(zi) - yi * zi;
        let r = sigmoid(zi) - yi;
        grad_sum.scaled_add(r, &row);
        grad_b = grad_b + r;
    }
    let half = T::of(0.5);
    let penalty = half * l2 * weights.dot(&weights);
    let grad_w = grad_sum / n + &weights * l2;
    let grad_b = grad_b / n;
    (loss / n + penalty, grad_w, grad_b)
}

pub(crate) fn fit<T: Scalar>(params: &LogisticParams, x: ArrayView2<'_, T>, y: &[u8]) -> Result<LogisticModel<T>> {
    params.validate()?;
    if x.nrows() < 2 {
        return Err(Error::DegenerateTraining(
            "logistic regression needs at least two rows".into(),
        ));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateTraining("only one label class present".into()));
    }
    let d = x.ncols();
    let (mean, scale) = if params.standardize {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .std_axis(Axis(0), T::zero())
            .mapv(|s| if s > T::zero() { s } else { T::one() });
        (mean, scale)
    } else {
        (Array1::zeros(d), Array1::ones(d))
    };
    let xs = ((&x - &mean) / &scale).as_standard_layout().into_owned();

    let lr = T::of(params.learning_rate);
    let l2 = T::of(params.l2);
    let mut w = Array1::zeros(d);
    let mut b = T::zero();
    let mut history = Vec::with_capacity(params.epochs + 1);
    for _ in 0..params.epochs {
        let (loss, gw, gb) = loss_and_gradient(xs.view(), y, w.view(), b, l2);
        history.push(loss);
        w = w - gw * lr;
        b = b - gb * lr;
    }
    history.push(loss_and_gradient(xs.view(), y, w.view(), b, l2).0);
    Ok(LogisticModel {
        weights: w,
        intercept: b,
        mean,
        scale,
        loss_history: history,
    })
}

impl<T: Scalar> LogisticModel<T> {
    /// Model that scores raw features directly as `sigmoid(a.x + b)`.
    pub fn from_coefficients(weights: Array1<T>, intercept: T) -> Self {
        let d = weights.len();
        LogisticModel {
            weights,
            intercept,
            mean: Array1::zeros(d),
            scale: Array1::ones(d),
            loss_history: Vec::new(),
        }
    }

    /// `(a, b)` such that the score is `sigmoid(a.x + b)` on raw features.
    pub fn coefficients(&self) -> (Array1<T>, T) {
        let a = &self.weights / &self.scale;
        let b = self.intercept - a.dot(&self.mean);
        (a, b)
    }

    pub(crate) fn predict_proba(&self, x: ArrayView2<'_, T>) -> Vec<T> {
        let xs = (&x - &self.mean) / &self.scale;
        xs.dot(&self.weights)
            .iter()
            .map(|&z| sigmoid(z + self.intercept))
            .collect()
    }
}
