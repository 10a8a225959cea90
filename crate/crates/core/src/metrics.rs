//! Debiasing-quality metrics (correct/wrong flip rates, F1) and group
//! fairness metrics (selection rates, disparate impact ratio and difference,
//! confusion-based parity gaps).
//!
//! Rate-valued functions are generic over [`Rate`], so they can be evaluated
//! exactly in rational arithmetic as well as in floating point. Throughout,
//! the Minority group plays the "protected" (p) role and Majority the
//! "unprotected" (u) role, and label 1 is the favourable outcome.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{FlipLog, Group};
use crate::error::{Error, Result};
use crate::scalar::Rate;

/// Fraction of injected flips whose inverse flip appears among the proposed
/// flips (the row was restored).
pub fn cfr<R: Rate>(injected: &FlipLog, proposed: &FlipLog) -> Result<R> {
    if injected.is_empty() {
        return Err(Error::EmptyInjectedLog);
    }
    let undo: HashSet<_> = proposed.iter().map(|f| (f.row_id, f.direction)).collect();
    let restored = injected
        .iter()
        .filter(|f| undo.contains(&(f.row_id, f.direction.inverse())))
        .count();
    Ok(R::ratio(restored, injected.len()))
}

/// Fraction of proposed flips on rows that were never bias-injected (wrong
/// flips). Zero when nothing was proposed.
pub fn mfr<R: Rate>(injected: &FlipLog, proposed: &FlipLog) -> R {
    if proposed.is_empty() {
        return R::zero();
    }
    let biased: HashSet<u64> = injected.iter().map(|f| f.row_id).collect();
    let wrong = proposed.iter().filter(|f| !biased.contains(&f.row_id)).count();
    R::ratio(wrong, proposed.len())
}

/// Fraction of injected flips left uncorrected, `1 - cfr`.
pub fn miss_rate<R: Rate>(injected: &FlipLog, proposed: &FlipLog) -> Result<R> {
    Ok(R::one() - cfr::<R>(injected, proposed)?)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    Ok(())
}

/// `2TP / (2TP + FP + FN)`, zero when there are no positives at all.
pub fn f1<R: Rate>(y_true: &[u8], y_pred: &[u8]) -> Result<R> {
    check_len(y_true.len(), y_pred.len())?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 { R::zero() } else { R::ratio(2 * tp, denom) })
}

/// `(minority rate, majority rate)` of outcome 1.
pub fn selection_rates<R: Rate>(y: &[u8], groups: &[Group]) -> Result<(R, R)> {
    check_len(y.len(), groups.len())?;
    let mut n = [0usize; 2];
    let mut pos = [0usize; 2];
    for (&v, &g) in y.iter().zip(groups) {
        let k = (g == Group::Minority) as usize;
        n[k] += 1;
        pos[k] += (v == 1) as usize;
    }
    if n[1] == 0 {
        return Err(Error::EmptyGroup("minority"));
    }
    if n[0] == 0 {
        return Err(Error::EmptyGroup("majority"));
    }
    Ok((R::ratio(pos[1], n[1]), R::ratio(pos[0], n[0])))
}

/// Disparate impact ratio: minority rate / majority rate.
pub fn dir<R: Rate>(y: &[u8], groups: &[Group]) -> Result<R> {
    let (min, maj) = selection_rates::<R>(y, groups)?;
    if maj == R::zero() {
        return Err(Error::ZeroMajorityRate);
    }
    Ok(min / maj)
}

/// Disparate impact difference: minority rate - majority rate.
pub fn did<R: Rate>(y: &[u8], groups: &[Group]) -> Result<R> {
    let (min, maj) = selection_rates::<R>(y, groups)?;
    Ok(min - maj)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn tally(&mut self, t: u8, p: u8) {
        match (t, p) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }

    fn rate<R: Rate>(num: usize, den: usize) -> Option<R> {
        (den > 0).then(|| R::ratio(num, den))
    }

    pub fn selection_rate<R: Rate>(&self) -> Option<R> {
        Self::rate(self.tp + self.fp, self.n())
    }
    pub fn tpr<R: Rate>(&self) -> Option<R> {
        Self::rate(self.tp, self.tp + self.fn_)
    }
    pub fn tnr<R: Rate>(&self) -> Option<R> {
        Self::rate(self.tn, self.tn + self.fp)
    }
    pub fn fpr<R: Rate>(&self) -> Option<R> {
        Self::rate(self.fp, self.fp + self.tn)
    }
    pub fn fnr<R: Rate>(&self) -> Option<R> {
        Self::rate(self.fn_, self.fn_ + self.tp)
    }
}

/// Per-group confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub minority: Confusion,
    pub majority: Confusion,
}

impl GroupConfusion {
    pub fn get(&self, group: Group) -> &Confusion {
        match group {
            Group::Minority => &self.minority,
            Group::Majority => &self.majority,
        }
    }

    /// The same counts with the group roles exchanged.
    pub fn swapped(&self) -> Self {
        GroupConfusion {
            minority: self.majority,
            majority: self.minority,
        }
    }
}

pub fn group_confusion(y_true: &[u8], y_pred: &[u8], groups: &[Group]) -> Result<GroupConfusion> {
    check_len(y_true.len(), y_pred.len())?;
    check_len(y_true.len(), groups.len())?;
    let mut gc = GroupConfusion::default();
    for ((&t, &p), &g) in y_true.iter().zip(y_pred).zip(groups) {
        match g {
            Group::Minority => gc.minority.tally(t, p),
            Group::Majority => gc.majority.tally(t, p),
        }
    }
    Ok(gc)
}

/// Confusion-based fairness scores. A field is `None` when one of its rate
/// denominators is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityMetrics<R> {
    /// Statistical parity difference, `sel_p - sel_u`.
    pub spd: Option<R>,
    /// Disparate impact, `sel_p / sel_u`.
    pub di: Option<R>,
    /// Equal opportunity, `TPR_p - TPR_u`.
    pub eoo: Option<R>,
    /// `|TPR_p - TPR_u|`.
    pub aeord: Option<R>,
    /// `|(TPR_p + TNR_p)/2 - (TPR_u + TNR_u)/2|`.
    pub abad: Option<R>,
    /// `|(FPR_p - FPR_u) + (TPR_p - TPR_u)| / 2`.
    pub aaod: Option<R>,
    /// Equalized-odds gap: `max(|TPR_p - TPR_u|, |FPR_p - FPR_u|)`.
    pub eo: Option<R>,
    /// Demographic-parity gap: `|sel_p - sel_u|`.
    pub dp: Option<R>,
}

// Printed forms of two rows of the usual fairness-metric table, which this
// module does not follow literally:
//   ABAD = | 1/2 [TPR_p + TNR_p] - [TPR_u + TNR_u] |
//   AAOD = | ((FPR_u + FNR_p) - (TPR_u + TPR_p)) / 2 |
// The implementations above use the standard balanced-accuracy and
// average-odds definitions instead.
pub fn parity_metrics<R: Rate>(gc: &GroupConfusion) -> ParityMetrics<R> {
    let (p, u) = (&gc.minority, &gc.majority);
    let sel = p.selection_rate::<R>().zip(u.selection_rate::<R>());
    let tpr = p.tpr::<R>().zip(u.tpr::<R>());
    let tnr = p.tnr::<R>().zip(u.tnr::<R>());
    let fpr = p.fpr::<R>().zip(u.fpr::<R>());
    let half = R::half();

    let spd = sel.map(|(a, b)| a - b);
    let di = sel.and_then(|(a, b)| (b != R::zero()).then(|| a / b));
    let eoo = tpr.map(|(a, b)| a - b);
    let abad = tpr
        .zip(tnr)
        .map(|((tp_p, tp_u), (tn_p, tn_u))| (half * (tp_p + tn_p) - half * (tp_u + tn_u)).abs());
    let aaod = tpr
        .zip(fpr)
        .map(|((tp_p, tp_u), (fp_p, fp_u))| half * ((fp_p - fp_u) + (tp_p - tp_u)).abs());
    let eo = tpr.zip(fpr).map(|((tp_p, tp_u), (fp_p, fp_u))| {
        let a = (tp_p - tp_u).abs();
        let b = (fp_p - fp_u).abs();
        if a >= b {
            a
        } else {
            b
        }
    });
    ParityMetrics {
        spd,
        di,
        eoo,
        aeord: eoo.map(|v| v.abs()),
        abad,
        aaod,
        eo,
        dp: spd.map(|v| v.abs()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Computed on dataset labels.
    Labels,
    /// Computed on model predictions.
    Predictions,
}

/// Serializable summary of group fairness for one outcome vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub source: Source,
    pub rate_minority: f64,
    pub rate_majority: f64,
    /// `None` when the majority rate is zero.
    pub dir: Option<f64>,
    pub did: f64,
    /// Confusion-based metrics; present only when reference labels were given.
    pub parity: Option<ParityMetrics<f64>>,
}

impl FairnessReport {
    /// `y_true` is the reference for confusion-based metrics (e.g. test labels
    /// when `y` holds predictions).
    pub fn compute(source: Source, y: &[u8], groups: &[Group], y_true: Option<&[u8]>) -> Result<Self> {
        let (rate_minority, rate_majority) = selection_rates::<f64>(y, groups)?;
        let parity = y_true
            .map(|t| group_confusion(t, y, groups).map(|gc| parity_metrics::<f64>(&gc)))
            .transpose()?;
        Ok(FairnessReport {
            source,
            rate_minority,
            rate_majority,
            dir: (rate_majority > 0.0).then(|| rate_minority / rate_majority),
            did: rate_minority - rate_majority,
            parity,
        })
    }
}
