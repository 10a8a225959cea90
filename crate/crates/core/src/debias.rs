//! Directional label debiasing.
//!
//! * **FairMin** trains on the Majority group only, scores the Minority
//!   group, and flips Minority labels 0 -> 1 where the model is confident the
//!   label should be 1 (score > t).
//! * **FairMaj** mirrors it: trains on the Minority group and flips Majority
//!   labels 1 -> 0 where the model is confident the label should be 0
//!   (score < 1 - t).
//! * **FairLabel** runs FairMin and then, optionally, FairMaj.
//! * **Naive** is the undirected baseline: the FairMin flip rule with a model
//!   trained on every row.
//!
//! The threshold `t` is always the confidence a flip requires, so `t = 1`
//! never flips and larger `t` never flips more. It is either fixed or tuned on
//! a hold-out slice so that the label disparate impact ratio gets as close to
//! one as the grid allows.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierModel, ClassifierSpec};
use crate::data::{apply_flips, Direction, Flip, FlipLog, Group, Origin, TabularDataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed {
        threshold: f64,
    },
    /// Grid search over `{0, step, 2 step, ..., 1}` on a random hold-out of
    /// `holdout_fraction` of all rows, which is excluded from training.
    TuneToUnitDir {
        holdout_fraction: f64,
        grid_step: f64,
    },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed { threshold: 0.5 }
    }
}

impl ThresholdPolicy {
    pub fn tuned() -> Self {
        ThresholdPolicy::TuneToUnitDir {
            holdout_fraction: 0.2,
            grid_step: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ThresholdPolicy::Fixed { threshold } => (0.0..=1.0).contains(&threshold),
            ThresholdPolicy::TuneToUnitDir {
                holdout_fraction,
                grid_step,
            } => holdout_fraction > 0.0 && holdout_fraction < 1.0 && grid_step > 0.0 && grid_step <= 0.5,
        };
        if !ok {
            return Err(Error::InvalidSpec(format!("threshold policy out of range: {self:?}")));
        }
        Ok(())
    }
}

fn default_iterations() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebiasConfig {
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
    #[serde(default)]
    pub run_fairmaj: bool,
    /// Append a minority-indicator column to the classifier's input. It is
    /// constant inside a single-group training set, so it only matters for
    /// the Naive baseline.
    #[serde(default)]
    pub include_protected: bool,
    /// Experimental: number of FairMin/FairMaj passes in [`fair_label`].
    /// Passes stop early once one produces no flips.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DebiasConfig {
    pub fn new(classifier: ClassifierSpec) -> Self {
        DebiasConfig {
            classifier,
            threshold: ThresholdPolicy::default(),
            run_fairmaj: false,
            include_protected: false,
            iterations: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        self.threshold.validate()?;
        if self.iterations == 0 {
            return Err(Error::InvalidSpec("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Raise Minority labels (0 -> 1).
    Min,
    /// Lower Majority labels (1 -> 0).
    Maj,
}

impl Phase {
    pub fn target(self) -> Group {
        match self {
            Phase::Min => Group::Minority,
            Phase::Maj => Group::Majority,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Phase::Min => Direction::ZeroToOne,
            Phase::Maj => Direction::OneToZero,
        }
    }

    /// Whether a row with this score is flipped at confidence `threshold`.
    pub fn flips<T: Scalar>(self, score: T, threshold: f64) -> bool {
        let t = T::of(threshold);
        match self {
            Phase::Min => score > t,
            Phase::Maj => score < T::one() - t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FairMin,
    FairMaj,
    FairLabel,
    Naive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FairMin => "fairmin",
            Method::FairMaj => "fairmaj",
            Method::FairLabel => "fairlabel",
            Method::Naive => "naive",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fairmin" => Ok(Method::FairMin),
            "fairmaj" => Ok(Method::FairMaj),
            "fairlabel" => Ok(Method::FairLabel),
            "naive" => Ok(Method::Naive),
            other => Err(Error::InvalidSpec(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub threshold: f64,
    pub tuned: bool,
    pub training_rows: usize,
    pub flips: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub minority: f64,
    pub majority: f64,
    /// Label disparate impact ratio; `None` if the majority rate is zero.
    pub dir: Option<f64>,
}

impl GroupRates {
    fn of<T: Scalar>(ds: &TabularDataset<T>) -> Result<Self> {
        let groups = ds.groups();
        let (minority, majority) = metrics::selection_rates::<f64>(ds.labels(), &groups)?;
        Ok(GroupRates {
            minority,
            majority,
            dir: (majority > 0.0).then(|| minority / majority),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasReport {
    pub method: Method,
    pub classifier: String,
    pub proposed_flips: FlipLog,
    pub phases: Vec<PhaseSummary>,
    pub before: GroupRates,
    pub after: GroupRates,
}

impl DebiasReport {
    /// Threshold of the last tuned phase, if any phase was tuned.
    pub fn tuned_threshold(&self) -> Option<f64> {
        self.phases.iter().rev().find(|p| p.tuned).map(|p| p.threshold)
    }
}

fn model_input<T: Scalar>(ds: &TabularDataset<T>, cfg: &DebiasConfig) -> TabularDataset<T> {
    if cfg.include_protected {
        ds.with_group_indicator()
    } else {
        ds.clone()
    }
}

fn require_both_classes(labels: impl Iterator<Item = u8>, who: &str) -> Result<()> {
    let (mut zeros, mut ones) = (0usize, 0usize);
    for y in labels {
        if y == 1 {
            ones += 1;
        } else {
            zeros += 1;
        }
    }
    if zeros == 0 || ones == 0 {
        return Err(Error::DegenerateTraining(format!(
            "{who} training rows contain a single label class"
        )));
    }
    Ok(())
}

/// Flips proposed by `phase` on `ds` for fixed `scores` (one per row).
fn propose<T: Scalar>(ds: &TabularDataset<T>, scores: &[T], phase: Phase, threshold: f64) -> FlipLog {
    let source = phase.direction().source_label();
    let mut log = FlipLog::new(ds.provenance());
    for (i, tag) in ds.protected().iter().enumerate() {
        if tag.group == phase.target() && ds.labels()[i] == source && phase.flips(scores[i], threshold) {
            log.push(Flip {
                row_id: ds.row_ids()[i],
                direction: phase.direction(),
                origin: Origin::Proposed,
            })
            .expect("one entry per row");
        }
    }
    log
}

/// Applies the flip rule of `phase` with an already fitted model.
///
/// `ds` must have the width the model was trained on (including the group
/// indicator column, if the model used one).
pub fn apply_phase_rule<T: Scalar>(
    ds: &TabularDataset<T>,
    model: &ClassifierModel<T>,
    phase: Phase,
    threshold: f64,
) -> Result<(TabularDataset<T>, FlipLog)> {
    let scores = classify::predict_proba(model, ds.features())?;
    let log = propose(ds, &scores, phase, threshold);
    Ok((apply_flips(ds, &log)?, log))
}

/// Candidate thresholds `{0, step, 2 step, ..., 1}`.
pub fn threshold_grid(grid_step: f64) -> Vec<f64> {
    let n = (1.0 / grid_step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| (k as f64 * grid_step).min(1.0)).collect();
    if *grid.last().expect("non-empty") < 1.0 {
        grid.push(1.0);
    }
    grid
}

/// Picks the threshold whose simulated flips on `holdout` bring the label
/// disparate impact ratio closest to one. Ties go to the larger threshold.
pub fn tune_threshold<T: Scalar>(
    model: &ClassifierModel<T>,
    holdout: &TabularDataset<T>,
    phase: Phase,
    grid_step: f64,
) -> Result<f64> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidSpec(format!("grid step {grid_step} outside (0, 0.5]")));
    }
    let n_min = holdout.count_group(Group::Minority);
    let n_maj = holdout.count_group(Group::Majority);
    if n_min == 0 {
        return Err(Error::EmptyGroup("minority"));
    }
    if n_maj == 0 {
        return Err(Error::EmptyGroup("majority"));
    }
    let scores = classify::predict_proba(model, holdout.features())?;
    let mut pos_min = 0usize;
    let mut pos_maj = 0usize;
    for (tag, &y) in holdout.protected().iter().zip(holdout.labels()) {
        match tag.group {
            Group::Minority => pos_min += y as usize,
            Group::Majority => pos_maj += y as usize,
        }
    }
    let source = phase.direction().source_label();
    let eligible: Vec<T> = holdout
        .protected()
        .iter()
        .zip(holdout.labels())
        .zip(&scores)
        .filter(|((tag, &y), _)| tag.group == phase.target() && y == source)
        .map(|(_, &s)| s)
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for &t in threshold_grid(grid_step).iter().rev() {
        let flips = eligible.iter().filter(|&&s| phase.flips(s, t)).count();
        let (p_min, p_maj) = match phase {
            Phase::Min => (pos_min + flips, pos_maj),
            Phase::Maj => (pos_min, pos_maj - flips),
        };
        if p_maj == 0 {
            continue;
        }
        let ratio = (p_min as f64 / n_min as f64) / (p_maj as f64 / n_maj as f64);
        let gap = (ratio - 1.0).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, t));
        }
    }
    best.map(|(_, t)| t).ok_or(Error::ZeroMajorityRate)
}

/// Which rows train the phase's classifier.
#[derive(Clone, Copy)]
enum Population {
    Group(Group),
    Everyone,
}

struct PhaseRun<T> {
    output: TabularDataset<T>,
    flips: FlipLog,
    summary: PhaseSummary,
}

fn run_phase<T: Scalar>(
    ds: &TabularDataset<T>,
    cfg: &DebiasConfig,
    phase: Phase,
    population: Population,
) -> Result<PhaseRun<T>> {
    cfg.validate()?;
    let input = model_input(ds, cfg);
    let in_population = |i: usize| match population {
        Population::Group(g) => ds.protected()[i].group == g,
        Population::Everyone => true,
    };

    let (train_positions, holdout) = match cfg.threshold {
        ThresholdPolicy::Fixed { .. } => ((0..ds.len()).filter(|&i| in_population(i)).collect::<Vec<_>>(), None),
        ThresholdPolicy::TuneToUnitDir {
            holdout_fraction,
            grid_step,
        } => {
            let n_hold = ((ds.len() as f64) * holdout_fraction).round() as usize;
            let mut order: Vec<usize> = (0..ds.len()).collect();
            let stage = format!("debias/holdout/{phase:?}");
            order.shuffle(&mut rng::stream(cfg.seed, &stage));
            let mut held: Vec<usize> = order[..n_hold].to_vec();
            held.sort_unstable();
            let held_set: HashSet<usize> = held.iter().copied().collect();
            let train = (0..ds.len())
                .filter(|&i| in_population(i) && !held_set.contains(&i))
                .collect();
            (train, Some((input.select(&held), grid_step)))
        }
    };
    let who = match population {
        Population::Group(g) => g.as_str(),
        Population::Everyone => "all",
    };
    if train_positions.is_empty() {
        return Err(Error::EmptyGroup(who));
    }
    require_both_classes(train_positions.iter().map(|&i| ds.labels()[i]), who)?;

    let train = input.select(&train_positions);
    let model = classify::fit(&cfg.classifier, &train)?;
    let (threshold, tuned) = match (&cfg.threshold, holdout) {
        (ThresholdPolicy::Fixed { threshold }, _) => (*threshold, false),
        (_, Some((holdout, step))) => (tune_threshold(&model, &holdout, phase, step)?, true),
        (_, None) => unreachable!("tuning policy always builds a hold-out"),
    };

    let scores = classify::predict_proba(&model, input.features())?;
    let flips = propose(ds, &scores, phase, threshold);
    let output = apply_flips(ds, &flips)?;
    Ok(PhaseRun {
        output,
        summary: PhaseSummary {
            phase,
            threshold,
            tuned,
            training_rows: train_positions.len(),
            flips: flips.len(),
        },
        flips,
    })
}

fn require_groups<T: Scalar>(ds: &TabularDataset<T>) -> Result<()> {
    if ds.count_group(Group::Majority) == 0 {
        return Err(Error::EmptyGroup("majority"));
    }
    if ds.count_group(Group::Minority) == 0 {
        return Err(Error::EmptyGroup("minority"));
    }
    Ok(())
}

fn report<T: Scalar>(
    method: Method,
    cfg: &DebiasConfig,
    before: &TabularDataset<T>,
    after: &TabularDataset<T>,
    proposed_flips: FlipLog,
    phases: Vec<PhaseSummary>,
) -> Result<DebiasReport> {
    Ok(DebiasReport {
        method,
        classifier: cfg.classifier.to_string(),
        proposed_flips,
        phases,
        before: GroupRates::of(before)?,
        after: GroupRates::of(after)?,
    })
}

/// Trains on Majority rows, raises Minority labels the model believes are 1.
pub fn fair_min<T: Scalar>(ds: &TabularDataset<T>, cfg: &DebiasConfig) -> Result<(TabularDataset<T>, DebiasReport)> {
    require_groups(ds)?;
    let run = run_phase(ds, cfg, Phase::Min, Population::Group(Group::Majority))?;
    let rep = report(Method::FairMin, cfg, ds, &run.output, run.flips, vec![run.summary])?;
    Ok((run.output, rep))
}

/// Trains on Minority rows, lowers Majority labels the model believes are 0.
pub fn fair_maj<T: Scalar>(ds: &TabularDataset<T>, cfg: &DebiasConfig) -> Result<(TabularDataset<T>, DebiasReport)> {
    require_groups(ds)?;
    let run = run_phase(ds, cfg, Phase::Maj, Population::Group(Group::Minority))?;
    let rep = report(Method::FairMaj, cfg, ds, &run.output, run.flips, vec![run.summary])?;
    Ok((run.output, rep))
}

/// FairMin, then FairMaj when `cfg.run_fairmaj` is set.
pub fn fair_label<T: Scalar>(ds: &TabularDataset<T>, cfg: &DebiasConfig) -> Result<(TabularDataset<T>, DebiasReport)> {
    require_groups(ds)?;
    cfg.validate()?;
    let mut current = ds.clone();
    let mut flips = FlipLog::new(ds.provenance());
    let mut phases = Vec::new();
    for pass in 0..cfg.iterations {
        // Later passes draw fresh hold-outs.
        let pass_cfg = DebiasConfig {
            seed: if pass == 0 {
                cfg.seed
            } else {
                rng::derive_seed(cfg.seed, &format!("pass/{pass}"))
            },
            ..*cfg
        };
        let mut changed = false;
        let mut steps = vec![(Phase::Min, Group::Majority)];
        if cfg.run_fairmaj {
            steps.push((Phase::Maj, Group::Minority));
        }
        for (phase, trainer) in steps {
            let run = run_phase(&current, &pass_cfg, phase, Population::Group(trainer))?;
            changed |= !run.flips.is_empty();
            flips.extend(&run.flips)?;
            phases.push(run.summary);
            current = run.output;
        }
        if !changed {
            break;
        }
    }
    let rep = report(Method::FairLabel, cfg, ds, &current, flips, phases)?;
    Ok((current, rep))
}

/// Baseline: the FairMin flip rule with a classifier trained on every row.
pub fn naive_debias<T: Scalar>(
    ds: &TabularDataset<T>,
    cfg: &DebiasConfig,
) -> Result<(TabularDataset<T>, DebiasReport)> {
    let run = run_phase(ds, cfg, Phase::Min, Population::Everyone)?;
    let rep = report(Method::Naive, cfg, ds, &run.output, run.flips, vec![run.summary])?;
    Ok((run.output, rep))
}

pub fn debias<T: Scalar>(
    ds: &TabularDataset<T>,
    method: Method,
    cfg: &DebiasConfig,
) -> Result<(TabularDataset<T>, DebiasReport)> {
    match method {
        Method::FairMin => fair_min(ds, cfg),
        Method::FairMaj => fair_maj(ds, cfg),
        Method::FairLabel => fair_label(ds, cfg),
        Method::Naive => naive_debias(ds, cfg),
    }
}
