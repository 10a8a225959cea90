//! Shared strategies, oracles and property bodies for the integration tests
//! and the acceptance report.
#![allow(dead_code)]

use fairlabel::classify::{self, ClassifierKind, ClassifierSpec, GbtParams, LogisticParams};
use fairlabel::debias::{self, DebiasConfig, ThresholdPolicy};
use fairlabel::metrics;
use fairlabel::synth::{self, BiasSpec, LinearGeneratorSpec};
use fairlabel::{apply_flips, Dataset, Direction, Error, ExactRate, Flip, FlipLog, Group, GroupTag, Origin};
use ndarray::{Array1, Array2};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Strategies

/// Small tagged dataset. Rows 0..4 are forced to cover every (group, label)
/// pair so both groups and both classes always exist.
pub fn small_dataset() -> impl Strategy<Value = Dataset> {
    (8usize..40, 1usize..=3)
        .prop_flat_map(|(n, d)| {
            (
                Just((n, d)),
                prop::collection::vec(-3.0f64..3.0, n * d),
                prop::collection::vec(0u8..=1, n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|((n, d), x, mut y, mut minority)| {
            for (i, &(m, label)) in [(false, 0), (false, 1), (true, 0), (true, 1)].iter().enumerate() {
                minority[i] = m;
                y[i] = label;
            }
            let mut x = Array2::from_shape_vec((n, d), x).unwrap();
            // A weak label signal so fitted models are not pure noise.
            for i in 0..n {
                x[[i, 0]] += if y[i] == 1 { 1.0 } else { -1.0 };
            }
            let tags = minority
                .iter()
                .map(|&m| GroupTag::plain(if m { Group::Minority } else { Group::Majority }))
                .collect();
            let ids = (0..n as u64).map(|i| 1000 + 7 * i).collect();
            let names = (0..d).map(|j| format!("f{j}")).collect();
            Dataset::new(ids, x, names, y, tags, "prop").unwrap()
        })
}

pub fn small_classifier() -> impl Strategy<Value = ClassifierSpec> {
    prop_oneof![
        Just(ClassifierSpec {
            kind: ClassifierKind::LogisticRegression(LogisticParams {
                epochs: 100,
                ..LogisticParams::default()
            }),
            seed: 0,
        }),
        (1usize..=3).prop_map(ClassifierSpec::decision_tree),
        Just(ClassifierSpec {
            kind: ClassifierKind::GradientBoostedTrees(GbtParams {
                rounds: 20,
                max_depth: 2,
                ..GbtParams::default()
            }),
            seed: 0,
        }),
    ]
}

pub fn threshold_policy() -> impl Strategy<Value = ThresholdPolicy> {
    prop_oneof![
        3 => (0.0f64..=1.0).prop_map(|threshold| ThresholdPolicy::Fixed { threshold }),
        1 => Just(ThresholdPolicy::TuneToUnitDir { holdout_fraction: 0.25, grid_step: 0.05 }),
    ]
}

#[derive(Debug, Clone)]
pub struct Case {
    pub ds: Dataset,
    pub cfg: DebiasConfig,
}

pub fn debias_case() -> impl Strategy<Value = Case> {
    (
        small_dataset(),
        small_classifier(),
        threshold_policy(),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(ds, classifier, threshold, include_protected, seed)| Case {
            ds,
            cfg: DebiasConfig {
                threshold,
                include_protected,
                seed,
                ..DebiasConfig::new(classifier)
            },
        })
}

pub fn bias_case() -> impl Strategy<Value = (Dataset, BiasSpec)> {
    (
        small_dataset(),
        prop_oneof![Just(Group::Minority), Just(Group::Majority)],
        prop_oneof![Just(Direction::OneToZero), Just(Direction::ZeroToOne)],
        0.0f64..=1.0,
        any::<u64>(),
    )
        .prop_map(|(ds, target, direction, severity, seed)| {
            (
                ds,
                BiasSpec {
                    target,
                    direction,
                    severity,
                    seed,
                },
            )
        })
}

// ---------------------------------------------------------------------------
// Debiaser properties. `Ok(false)` means the case was vacuous: the debiaser
// legitimately refused it (a phase lacked a group or a class).

pub type PropertyFn = fn(&Case) -> PropResult;

pub type PropResult = Result<bool, TestCaseError>;

fn vacuous(e: &Error) -> bool {
    matches!(
        e,
        Error::EmptyGroup(_) | Error::DegenerateTraining(_) | Error::ZeroMajorityRate
    )
}

fn run<T>(r: fairlabel::Result<T>) -> Result<Option<T>, TestCaseError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if vacuous(&e) => Ok(None),
        Err(e) => Err(TestCaseError::fail(format!("unexpected error: {e}"))),
    }
}

fn lib<T>(r: fairlabel::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Only rows of `target` move, and only from `direction`'s source label to
/// its target label; everything else is untouched and the proposed log
/// reproduces the output.
fn directional(
    before: &Dataset,
    after: &Dataset,
    log: &FlipLog,
    target: Group,
    direction: Direction,
) -> Result<(), TestCaseError> {
    prop_assert_eq!(before.row_ids(), after.row_ids());
    prop_assert_eq!(before.features(), after.features());
    prop_assert_eq!(before.protected(), after.protected());
    let groups = before.groups();
    let mut changed = 0;
    for (i, (&a, &b)) in before.labels().iter().zip(after.labels()).enumerate() {
        if a != b {
            changed += 1;
            prop_assert_eq!(groups[i], target, "row {} flipped in the wrong group", i);
            prop_assert_eq!((a, b), (direction.source_label(), direction.target_label()));
        }
    }
    prop_assert_eq!(changed, log.len());
    for f in log.iter() {
        prop_assert_eq!(f.direction, direction);
        prop_assert_eq!(f.origin, Origin::Proposed);
    }
    prop_assert_eq!(&lib(apply_flips(before, log))?, after);
    Ok(())
}

pub fn fair_min_monotone(case: &Case) -> PropResult {
    let Some((out, rep)) = run(debias::fair_min(&case.ds, &case.cfg))? else {
        return Ok(false);
    };
    directional(
        &case.ds,
        &out,
        &rep.proposed_flips,
        Group::Minority,
        Direction::ZeroToOne,
    )?;
    Ok(true)
}

pub fn fair_maj_antitone(case: &Case) -> PropResult {
    let Some((out, rep)) = run(debias::fair_maj(&case.ds, &case.cfg))? else {
        return Ok(false);
    };
    directional(
        &case.ds,
        &out,
        &rep.proposed_flips,
        Group::Majority,
        Direction::OneToZero,
    )?;
    Ok(true)
}

fn rows_identical(a: &Dataset, b: &Dataset, group: Group) -> Result<(), TestCaseError> {
    for i in a.positions_of(group) {
        prop_assert_eq!(a.row_ids()[i], b.row_ids()[i]);
        prop_assert_eq!(a.labels()[i], b.labels()[i]);
        let (fa, fb) = (a.features(), b.features());
        prop_assert_eq!(fa.row(i), fb.row(i));
        prop_assert_eq!(&a.protected()[i], &b.protected()[i]);
    }
    Ok(())
}

pub fn group_isolation(case: &Case) -> PropResult {
    let mut any = false;
    if let Some((out, _)) = run(debias::fair_min(&case.ds, &case.cfg))? {
        rows_identical(&case.ds, &out, Group::Majority)?;
        any = true;
    }
    if let Some((out, _)) = run(debias::fair_maj(&case.ds, &case.cfg))? {
        rows_identical(&case.ds, &out, Group::Minority)?;
        any = true;
    }
    Ok(any)
}

/// `(minority positives, majority positives)`.
fn positives(ds: &Dataset) -> (u64, u64) {
    let mut p = (0, 0);
    for (tag, &y) in ds.protected().iter().zip(ds.labels()) {
        match tag.group {
            Group::Minority => p.0 += y as u64,
            Group::Majority => p.1 += y as u64,
        }
    }
    p
}

/// DIR(after) >= DIR(before) by integer cross-multiplication. Group sizes
/// are unchanged by a phase, so they cancel; a zero majority count in `after`
/// reads as +infinity.
fn dir_not_lower(before: &Dataset, after: &Dataset) -> Result<(), TestCaseError> {
    let (min_b, maj_b) = positives(before);
    let (min_a, maj_a) = positives(after);
    prop_assert!(
        min_a * maj_b >= min_b * maj_a,
        "DIR decreased: positives ({min_b}, {maj_b}) -> ({min_a}, {maj_a})"
    );
    if maj_a > 0 && maj_b > 0 {
        let b: ExactRate = lib(metrics::dir(before.labels(), &before.groups()))?;
        let a: ExactRate = lib(metrics::dir(after.labels(), &after.groups()))?;
        prop_assert!(a >= b);
    }
    Ok(())
}

pub fn dir_non_decreasing(case: &Case) -> PropResult {
    let mut any = false;
    if let Some((out, _)) = run(debias::fair_min(&case.ds, &case.cfg))? {
        dir_not_lower(&case.ds, &out)?;
        any = true;
    }
    if let Some((out, _)) = run(debias::fair_maj(&case.ds, &case.cfg))? {
        dir_not_lower(&case.ds, &out)?;
        any = true;
    }
    Ok(any)
}

pub fn deterministic(case: &Case) -> PropResult {
    let cfg = DebiasConfig {
        run_fairmaj: true,
        ..case.cfg
    };
    let first = run(debias::fair_label(&case.ds, &cfg))?;
    let second = run(debias::fair_label(&case.ds.clone(), &cfg))?;
    prop_assert_eq!(&first, &second);
    Ok(first.is_some())
}

pub fn involution((ds, bias): &(Dataset, BiasSpec)) -> PropResult {
    let (biased, log) = lib(synth::inject_bias(ds, bias))?;
    prop_assert!(log
        .iter()
        .all(|f| f.origin == Origin::Injected && f.direction == bias.direction));
    let changed = ds.labels().iter().zip(biased.labels()).filter(|(a, b)| a != b).count();
    prop_assert_eq!(changed, log.len());
    let restored = lib(apply_flips(&biased, &log.inverted()))?;
    prop_assert_eq!(&restored, ds);
    prop_assert_eq!(restored.provenance(), ds.provenance());
    Ok(true)
}

// ---------------------------------------------------------------------------
// Brute-force metric oracle in exact rationals.

pub type Q = Ratio<i64>;

#[derive(Debug, Clone)]
pub struct MetricCase {
    pub y_true: Vec<u8>,
    pub y_pred: Vec<u8>,
    pub groups: Vec<Group>,
    pub injected: FlipLog,
    pub proposed: FlipLog,
}

fn flip_log(choices: &[(bool, bool)], origin: Origin) -> FlipLog {
    let mut log = FlipLog::new("oracle");
    for (row, &(present, up)) in choices.iter().enumerate() {
        if present {
            let direction = if up { Direction::ZeroToOne } else { Direction::OneToZero };
            log.push(Flip {
                row_id: row as u64,
                direction,
                origin,
            })
            .unwrap();
        }
    }
    log
}

pub fn metric_case() -> impl Strategy<Value = MetricCase> {
    (1usize..=30)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..=1, n),
                prop::collection::vec(0u8..=1, n),
                prop::collection::vec(any::<bool>(), n),
                // Flip logs range over a few more ids than there are rows.
                prop::collection::vec((any::<bool>(), any::<bool>()), n + 3),
                prop::collection::vec((any::<bool>(), any::<bool>()), n + 3),
            )
        })
        .prop_map(|(y_true, y_pred, minority, inj, prop_)| MetricCase {
            y_true,
            y_pred,
            groups: minority
                .iter()
                .map(|&m| if m { Group::Minority } else { Group::Majority })
                .collect(),
            injected: flip_log(&inj, Origin::Injected),
            proposed: flip_log(&prop_, Origin::Proposed),
        })
}

pub fn oracle_cfr(injected: &FlipLog, proposed: &FlipLog) -> Option<Q> {
    let inj = injected.entries();
    if inj.is_empty() {
        return None;
    }
    let mut hit = 0;
    for e in inj {
        let mut undone = false;
        for p in proposed.entries() {
            if p.row_id == e.row_id && p.direction != e.direction {
                undone = true;
            }
        }
        if undone {
            hit += 1;
        }
    }
    Some(Q::new(hit, inj.len() as i64))
}

pub fn oracle_mfr(injected: &FlipLog, proposed: &FlipLog) -> Q {
    let prop_ = proposed.entries();
    if prop_.is_empty() {
        return Q::from_integer(0);
    }
    let wrong = prop_
        .iter()
        .filter(|p| !injected.entries().iter().any(|e| e.row_id == p.row_id))
        .count();
    Q::new(wrong as i64, prop_.len() as i64)
}

pub fn oracle_f1(t: &[u8], p: &[u8]) -> Q {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for i in 0..t.len() {
        if t[i] == 1 && p[i] == 1 {
            tp += 1;
        }
        if t[i] == 0 && p[i] == 1 {
            fp += 1;
        }
        if t[i] == 1 && p[i] == 0 {
            fn_ += 1;
        }
    }
    if tp + fp + fn_ == 0 {
        Q::from_integer(0)
    } else {
        Q::new(2 * tp, 2 * tp + fp + fn_)
    }
}

/// Positive rate of `group`, `None` if the group is empty.
pub fn oracle_rate(y: &[u8], groups: &[Group], group: Group) -> Option<Q> {
    let mut n = 0;
    let mut pos = 0;
    for i in 0..y.len() {
        if groups[i] == group {
            n += 1;
            pos += y[i] as i64;
        }
    }
    (n > 0).then(|| Q::new(pos, n))
}

pub fn oracle_dir(y: &[u8], groups: &[Group]) -> Option<Q> {
    let min = oracle_rate(y, groups, Group::Minority)?;
    let maj = oracle_rate(y, groups, Group::Majority)?;
    (maj != Q::from_integer(0)).then(|| min / maj)
}

pub fn oracle_did(y: &[u8], groups: &[Group]) -> Option<Q> {
    Some(oracle_rate(y, groups, Group::Minority)? - oracle_rate(y, groups, Group::Majority)?)
}

/// `[tp, fp, tn, fn]` for one group.
pub fn oracle_confusion(t: &[u8], p: &[u8], groups: &[Group], group: Group) -> [usize; 4] {
    let mut c = [0; 4];
    for i in 0..t.len() {
        if groups[i] != group {
            continue;
        }
        let k = match (t[i], p[i]) {
            (1, 1) => 0,
            (0, 1) => 1,
            (0, 0) => 2,
            _ => 3,
        };
        c[k] += 1;
    }
    c
}

fn close(a: f64, b: Q) -> bool {
    (a - *b.numer() as f64 / *b.denom() as f64).abs() <= 1e-12
}

/// Compares every metric with the oracle, exactly in [`ExactRate`] and to
/// 1e-12 in `f64`.
pub fn metrics_match_oracle(c: &MetricCase) -> Result<(), TestCaseError> {
    let expect_cfr = oracle_cfr(&c.injected, &c.proposed);
    match expect_cfr {
        None => prop_assert!(matches!(
            metrics::cfr::<ExactRate>(&c.injected, &c.proposed),
            Err(Error::EmptyInjectedLog)
        )),
        Some(q) => {
            prop_assert_eq!(lib(metrics::cfr::<ExactRate>(&c.injected, &c.proposed))?, q);
            prop_assert!(close(lib(metrics::cfr::<f64>(&c.injected, &c.proposed))?, q));
            prop_assert_eq!(
                lib(metrics::miss_rate::<ExactRate>(&c.injected, &c.proposed))?,
                Q::from_integer(1) - q
            );
        }
    }
    let mfr = oracle_mfr(&c.injected, &c.proposed);
    prop_assert_eq!(metrics::mfr::<ExactRate>(&c.injected, &c.proposed), mfr);
    prop_assert!(close(metrics::mfr::<f64>(&c.injected, &c.proposed), mfr));

    let f1 = oracle_f1(&c.y_true, &c.y_pred);
    prop_assert_eq!(lib(metrics::f1::<ExactRate>(&c.y_true, &c.y_pred))?, f1);
    prop_assert!(close(lib(metrics::f1::<f64>(&c.y_true, &c.y_pred))?, f1));

    match oracle_did(&c.y_pred, &c.groups) {
        None => prop_assert!(matches!(
            metrics::did::<ExactRate>(&c.y_pred, &c.groups),
            Err(Error::EmptyGroup(_))
        )),
        Some(q) => {
            prop_assert_eq!(lib(metrics::did::<ExactRate>(&c.y_pred, &c.groups))?, q);
            prop_assert!(close(lib(metrics::did::<f64>(&c.y_pred, &c.groups))?, q));
        }
    }
    match oracle_dir(&c.y_pred, &c.groups) {
        None => prop_assert!(metrics::dir::<ExactRate>(&c.y_pred, &c.groups).is_err()),
        Some(q) => {
            prop_assert_eq!(lib(metrics::dir::<ExactRate>(&c.y_pred, &c.groups))?, q);
            prop_assert!(close(lib(metrics::dir::<f64>(&c.y_pred, &c.groups))?, q));
        }
    }

    let gc = lib(metrics::group_confusion(&c.y_true, &c.y_pred, &c.groups))?;
    for group in [Group::Minority, Group::Majority] {
        let got = gc.get(group);
        prop_assert_eq!(
            [got.tp, got.fp, got.tn, got.fn_],
            oracle_confusion(&c.y_true, &c.y_pred, &c.groups, group)
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Numerical checks for logistic regression.

/// Relative error `|g - fd| / max(|g|, |fd|)` (vector 2-norms) between the
/// analytic gradient and central differences on a random problem.
pub fn gradient_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..60);
    let d = rng.random_range(1..8);
    let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
    let w = Array1::from_shape_simple_fn(d, || rng.random_range(-1.5..1.5));
    let b: f64 = rng.random_range(-1.0..1.0);
    let l2: f64 = if rng.random::<bool>() {
        0.0
    } else {
        rng.random_range(0.0..0.5)
    };

    let (_, gw, gb) = classify::logistic::loss_and_gradient(x.view(), &y, w.view(), b, l2);
    let loss = |w: &Array1<f64>, b: f64| classify::logistic::loss_and_gradient(x.view(), &y, w.view(), b, l2).0;
    let h = 1e-5;
    let mut analytic = gw.to_vec();
    analytic.push(gb);
    let mut numeric = Vec::with_capacity(d + 1);
    for j in 0..d {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[j] += h;
        down[j] -= h;
        numeric.push((loss(&up, b) - loss(&down, b)) / (2.0 * h));
    }
    numeric.push((loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h));

    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Fits default logistic regression to noiseless linear data and returns
/// (held-out accuracy, cosine between fitted and generating weights).
pub fn noiseless_recovery(n: usize, seed: u64) -> (f64, f64) {
    let spec = LinearGeneratorSpec::new(n, 10, 0.0, seed);
    let (ds, truth) = synth::generate_linear::<f64>(&spec).unwrap();
    let (train, test) = fairlabel::split_train_test(&ds, 0.2, seed).unwrap();
    let model = classify::fit(&ClassifierSpec::logistic(), &train).unwrap();
    let pred = classify::predict(&model, test.features(), 0.5).unwrap();
    let correct = pred.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
    let (w, _) = model.as_logistic().unwrap().coefficients();
    let cos = w.dot(&truth.weights) / (w.dot(&w).sqrt() * truth.weights.dot(&truth.weights).sqrt());
    (correct as f64 / test.len() as f64, cos)
}

// ---------------------------------------------------------------------------

/// Spearman rank correlation (no tie handling; callers pass distinct values).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in order.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
