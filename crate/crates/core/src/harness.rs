//! End-to-end experiment pipelines and result emission.
//!
//! A synthetic repetition runs:
//!
//! 1. generate clean data `D0` and tag rows Majority/Minority at random;
//! 2. inject bias, giving `D1` plus the ground-truth injected flip log;
//! 3. debias `D1` with FairLabel (`D2`) and with the Naive baseline (`D3`),
//!    scoring each proposal against the injected log (CFR, MFR);
//! 4. split rows 80/20 (one split shared by every version), train a
//!    downstream model on the training rows of each version, and score its
//!    test predictions against the clean `D0` labels (F1) and by group (DIR,
//!    DID).
//!
//! Every random stage derives its own seed from the repetition seed, so the
//! whole pipeline is a pure function of the configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifierKind, ClassifierSpec, GbtParams};
use crate::data::{split_positions, Direction, FlipLog, Group, TabularDataset};
use crate::debias::{self, DebiasConfig, DebiasReport, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::metrics::{self, FairnessReport, Source};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::synth::{self, BiasSpec, ClusterGeneratorSpec, LinearGeneratorSpec, QuantileGeneratorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Linear {
        n_samples: usize,
        n_features: usize,
        p_noise: f64,
        #[serde(default)]
        feature_noise_std: f64,
    },
    Hypercube {
        n_samples: usize,
        #[serde(default = "ten")]
        n_features: usize,
        n_informative: usize,
        #[serde(default = "two")]
        n_redundant: usize,
        #[serde(default = "two")]
        n_clusters_per_class: usize,
        cube_edge: f64,
        cluster_std: f64,
    },
    Quantiles {
        n_samples: usize,
        n_features: usize,
    },
}

fn ten() -> usize {
    10
}
fn two() -> usize {
    2
}

impl GeneratorConfig {
    pub fn linear(n_samples: usize) -> Self {
        GeneratorConfig::Linear {
            n_samples,
            n_features: 10,
            p_noise: 0.0,
            feature_noise_std: 0.0,
        }
    }

    pub fn hypercube(n_samples: usize) -> Self {
        let s = ClusterGeneratorSpec::standard(n_samples, 0);
        GeneratorConfig::Hypercube {
            n_samples,
            n_features: s.n_features,
            n_informative: s.n_informative,
            n_redundant: s.n_redundant,
            n_clusters_per_class: s.n_clusters_per_class,
            cube_edge: s.cube_edge,
            cluster_std: s.cluster_std,
        }
    }

    pub fn quantiles(n_samples: usize) -> Self {
        GeneratorConfig::Quantiles {
            n_samples,
            n_features: 10,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            GeneratorConfig::Linear { .. } => "linear",
            GeneratorConfig::Hypercube { .. } => "hypercube",
            GeneratorConfig::Quantiles { .. } => "quantiles",
        }
    }

    pub fn generate<T: Scalar>(&self, seed: u64) -> Result<TabularDataset<T>> {
        match *self {
            GeneratorConfig::Linear {
                n_samples,
                n_features,
                p_noise,
                feature_noise_std,
            } => {
                let spec = LinearGeneratorSpec {
                    n_samples,
                    n_features,
                    p_noise,
                    feature_noise_std,
                    seed,
                };
                Ok(synth::generate_linear(&spec)?.0)
            }
            GeneratorConfig::Hypercube {
                n_samples,
                n_features,
                n_informative,
                n_redundant,
                n_clusters_per_class,
                cube_edge,
                cluster_std,
            } => synth::generate_hypercube_clusters(&ClusterGeneratorSpec {
                n_samples,
                n_features,
                n_informative,
                n_redundant,
                n_clusters_per_class,
                cube_edge,
                cluster_std,
                seed,
            }),
            GeneratorConfig::Quantiles { n_samples, n_features } => {
                synth::generate_gaussian_quantiles(&QuantileGeneratorSpec {
                    n_samples,
                    n_features,
                    seed,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub target: Group,
    pub direction: Direction,
    pub severity: f64,
}

impl BiasConfig {
    pub fn against_minority(severity: f64) -> Self {
        BiasConfig {
            target: Group::Minority,
            direction: Direction::OneToZero,
            severity,
        }
    }

    pub fn favouring_majority(severity: f64) -> Self {
        BiasConfig {
            target: Group::Majority,
            direction: Direction::ZeroToOne,
            severity,
        }
    }
}

/// GBT used by the synthetic scenarios: 300 rounds of depth-4 trees. The
/// library default (100 rounds, depth 3) leaves the oblique linear boundary
/// too coarse for the flip-level comparisons.
pub fn synthetic_gbt() -> ClassifierSpec {
    ClassifierSpec {
        kind: ClassifierKind::GradientBoostedTrees(GbtParams {
            rounds: 300,
            max_depth: 4,
            ..GbtParams::default()
        }),
        seed: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExperimentConfig {
    pub generator: GeneratorConfig,
    pub minority_fraction: f64,
    pub biases: Vec<BiasConfig>,
    pub fairlabel: DebiasConfig,
    pub naive: DebiasConfig,
    pub downstream: ClassifierSpec,
    /// Feed the minority indicator to downstream models.
    pub downstream_include_protected: bool,
    pub test_fraction: f64,
    pub repetitions: usize,
    pub base_seed: u64,
}

impl SyntheticExperimentConfig {
    /// Desk-scale standard scenario: linear family, N = 20,000, d = 10,
    /// balanced groups, Minority 1 -> 0 bias at `severity`,
    /// [`synthetic_gbt`] everywhere, 5 repetitions.
    pub fn standard(severity: f64) -> Self {
        let gbt = synthetic_gbt();
        SyntheticExperimentConfig {
            generator: GeneratorConfig::linear(20_000),
            minority_fraction: 0.5,
            biases: vec![BiasConfig::against_minority(severity)],
            fairlabel: DebiasConfig {
                include_protected: true,
                ..DebiasConfig::new(gbt)
            },
            naive: DebiasConfig {
                include_protected: true,
                ..DebiasConfig::new(gbt)
            },
            downstream: gbt,
            downstream_include_protected: true,
            test_fraction: 0.2,
            repetitions: 5,
            base_seed: 0,
        }
    }

    /// Bias in both directions (Minority 1 -> 0 and Majority 0 -> 1) with
    /// FairMaj enabled.
    pub fn double_bias(severity: f64) -> Self {
        let mut cfg = SyntheticExperimentConfig::standard(severity);
        cfg.biases.push(BiasConfig::favouring_majority(severity));
        cfg.fairlabel.run_fairmaj = true;
        cfg
    }

    pub fn with_severity(&self, severity: f64) -> Self {
        let mut cfg = self.clone();
        for b in &mut cfg.biases {
            b.severity = severity;
        }
        cfg
    }

    /// Severity of the first bias, used as the sweep coordinate.
    pub fn rate(&self) -> f64 {
        self.biases.first().map_or(0.0, |b| b.severity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidSpec("repetitions must be at least 1".into()));
        }
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.minority_fraction));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.test_fraction));
        }
        if let Some(b) = self.biases.iter().find(|b| !(0.0..=1.0).contains(&b.severity)) {
            return Err(Error::InvalidSpec(format!(
                "bias severity {} outside [0, 1]",
                b.severity
            )));
        }
        self.fairlabel.validate()?;
        self.naive.validate()?;
        self.downstream.validate()
    }
}

/// Metrics of one dataset version (and the downstream model trained on it)
/// within one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    /// `None` when nothing was injected.
    pub cfr: Option<f64>,
    pub mfr: f64,
    pub miss_rate: Option<f64>,
    pub proposed_flips: usize,
    pub label_dir: Option<f64>,
    pub f1: f64,
    pub dir: Option<f64>,
    pub did: f64,
}

impl MethodOutcome {
    fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "cfr" => self.cfr,
            "mfr" => Some(self.mfr),
            "miss_rate" => self.miss_rate,
            "proposed_flips" => Some(self.proposed_flips as f64),
            "label_dir" => self.label_dir,
            "f1" => Some(self.f1),
            "dir" => self.dir,
            "did" => Some(self.did),
            _ => None,
        }
    }
}

pub const METRICS: [&str; 8] = [
    "cfr",
    "mfr",
    "miss_rate",
    "proposed_flips",
    "label_dir",
    "f1",
    "dir",
    "did",
];

/// Dataset versions reported per repetition: clean `D0`, biased `D1`,
/// FairLabel `D2`, Naive `D3`.
pub const METHODS: [&str; 4] = ["clean", "biased", "fairlabel", "naive"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub repetition: usize,
    pub seed: u64,
    pub injected_flips: usize,
    pub methods: BTreeMap<String, MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub metric: String,
    /// Repetitions where the metric was defined.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (zero for a single value).
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: SyntheticExperimentConfig,
    pub family: String,
    pub rate: f64,
    pub debias_backend: String,
    pub downstream_backend: String,
    pub repetitions: Vec<Repetition>,
    pub summary: Vec<Summary>,
}

impl ExperimentResult {
    pub fn summary(&self, method: &str, metric: &str) -> Option<&Summary> {
        self.summary.iter().find(|s| s.method == method && s.metric == metric)
    }

    pub fn mean(&self, method: &str, metric: &str) -> Option<f64> {
        self.summary(method, metric).and_then(|s| s.mean)
    }
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

pub fn summarize(reps: &[Repetition]) -> Vec<Summary> {
    let mut out = Vec::new();
    for method in METHODS {
        for metric in METRICS {
            let values: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.methods.get(method).and_then(|m| m.metric(metric)))
                .collect();
            let stats = mean_std(&values);
            out.push(Summary {
                method: method.to_string(),
                metric: metric.to_string(),
                n: values.len(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
            });
        }
    }
    out
}

struct Downstream<'a> {
    spec: &'a ClassifierSpec,
    include_protected: bool,
    train: &'a [usize],
    test: &'a [usize],
    truth: &'a [u8],
    groups: &'a [Group],
}

impl Downstream<'_> {
    /// F1 against clean test labels, then prediction DIR and DID.
    fn evaluate<T: Scalar>(&self, version: &TabularDataset<T>) -> Result<(f64, Option<f64>, f64)> {
        let input = if self.include_protected {
            version.with_group_indicator()
        } else {
            version.clone()
        };
        let model = classify::fit(self.spec, &input.select(self.train))?;
        let test = input.select(self.test);
        let pred = classify::predict(&model, test.features(), 0.5)?;
        let f1 = metrics::f1::<f64>(self.truth, &pred)?;
        let report = FairnessReport::compute(Source::Predictions, &pred, self.groups, None)?;
        Ok((f1, report.dir, report.did))
    }
}

fn label_dir<T: Scalar>(ds: &TabularDataset<T>) -> Result<Option<f64>> {
    match metrics::dir::<f64>(ds.labels(), &ds.groups()) {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroMajorityRate) => Ok(None),
        Err(e) => Err(e),
    }
}

fn outcome<T: Scalar>(
    version: &TabularDataset<T>,
    injected: &FlipLog,
    proposed: &FlipLog,
    downstream: &Downstream<'_>,
) -> Result<MethodOutcome> {
    let (cfr, miss_rate) = if injected.is_empty() {
        (None, None)
    } else {
        (
            Some(metrics::cfr::<f64>(injected, proposed)?),
            Some(metrics::miss_rate::<f64>(injected, proposed)?),
        )
    };
    let (f1, dir, did) = downstream.evaluate(version)?;
    Ok(MethodOutcome {
        cfr,
        mfr: metrics::mfr::<f64>(injected, proposed),
        miss_rate,
        proposed_flips: proposed.len(),
        label_dir: label_dir(version)?,
        f1,
        dir,
        did,
    })
}

/// Runs one repetition with the given seed.
pub fn run_repetition<T: Scalar>(cfg: &SyntheticExperimentConfig, repetition: usize, seed: u64) -> Result<Repetition> {
    let clean = cfg.generator.generate::<T>(derive_seed(seed, "generate"))?;
    let clean = synth::assign_protected(&clean, cfg.minority_fraction, derive_seed(seed, "protected"))?;

    let mut biased = clean.clone();
    let mut injected = FlipLog::new(clean.provenance());
    for (k, b) in cfg.biases.iter().enumerate() {
        let spec = BiasSpec {
            target: b.target,
            direction: b.direction,
            severity: b.severity,
            seed: derive_seed(seed, &format!("bias/{k}")),
        };
        let (next, log) = synth::inject_bias(&biased, &spec)?;
        biased = next;
        injected.extend(&log)?;
    }

    let fl_cfg = DebiasConfig {
        seed: derive_seed(seed, "fairlabel"),
        ..cfg.fairlabel
    };
    let nv_cfg = DebiasConfig {
        seed: derive_seed(seed, "naive"),
        ..cfg.naive
    };
    let (fair, fair_report) = debias::fair_label(&biased, &fl_cfg)?;
    let (naive, naive_report) = debias::naive_debias(&biased, &nv_cfg)?;

    let (train, test) = split_positions(clean.len(), cfg.test_fraction, derive_seed(seed, "split"))?;
    let truth: Vec<u8> = test.iter().map(|&i| clean.labels()[i]).collect();
    let groups: Vec<Group> = test.iter().map(|&i| clean.protected()[i].group).collect();
    let downstream = Downstream {
        spec: &cfg.downstream,
        include_protected: cfg.downstream_include_protected,
        train: &train,
        test: &test,
        truth: &truth,
        groups: &groups,
    };

    let none = FlipLog::new("");
    let mut methods = BTreeMap::new();
    methods.insert(
        "clean".to_string(),
        outcome(&clean, &injected, &injected.inverted(), &downstream)?,
    );
    methods.insert("biased".to_string(), outcome(&biased, &injected, &none, &downstream)?);
    methods.insert(
        "fairlabel".to_string(),
        outcome(&fair, &injected, &fair_report.proposed_flips, &downstream)?,
    );
    methods.insert(
        "naive".to_string(),
        outcome(&naive, &injected, &naive_report.proposed_flips, &downstream)?,
    );
    Ok(Repetition {
        repetition,
        seed,
        injected_flips: injected.len(),
        methods,
    })
}

/// Full synthetic pipeline over `cfg.repetitions` repetitions (seeds
/// `base_seed + r`). Repetitions run in parallel; results are ordered by
/// repetition index.
pub fn run_synthetic_experiment(cfg: &SyntheticExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let reps = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.base_seed.wrapping_add(r as u64);
            run_repetition::<f64>(cfg, r, seed)
                .map_err(|e| Error::InvalidSpec(format!("repetition {r} (seed {seed}) failed: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        family: cfg.generator.family().to_string(),
        rate: cfg.rate(),
        debias_backend: cfg.fairlabel.classifier.to_string(),
        downstream_backend: cfg.downstream.to_string(),
        summary: summarize(&reps),
        repetitions: reps,
        config: cfg.clone(),
    })
}

/// One experiment per rate, each with its own base seed derived from the
/// configured one and the rate's position.
pub fn sweep_bias_rate(cfg: &SyntheticExperimentConfig, rates: &[f64]) -> Result<Vec<ExperimentResult>> {
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidSpec(format!("bias rate {r} outside [0, 1]")));
    }
    rates
        .iter()
        .enumerate()
        .map(|(k, &rate)| {
            let mut point = cfg.with_severity(rate);
            point.base_seed = derive_seed(cfg.base_seed, &format!("sweep/{k}"));
            run_synthetic_experiment(&point)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub fairlabel: DebiasConfig,
    pub downstream: ClassifierSpec,
    /// Feed the minority indicator to downstream models.
    pub downstream_include_protected: bool,
    pub test_fraction: f64,
    pub repetitions: usize,
    pub base_seed: u64,
}

/// Logistic regression for both the debiaser and the downstream models,
/// FairMin followed by FairMaj at the fixed 0.5 threshold.
impl Default for BenchmarkConfig {
    fn default() -> Self {
        let logistic = ClassifierSpec::logistic();
        BenchmarkConfig {
            fairlabel: DebiasConfig {
                threshold: ThresholdPolicy::Fixed { threshold: 0.5 },
                run_fairmaj: true,
                ..DebiasConfig::new(logistic)
            },
            downstream: logistic,
            downstream_include_protected: true,
            test_fraction: 0.2,
            repetitions: 5,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRepetition {
    pub seed: u64,
    /// Model trained on the original training labels.
    pub original: FairnessReport,
    /// Model trained on FairLabel-debiased training labels.
    pub debiased: FairnessReport,
    pub debias: DebiasReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub dataset: String,
    pub rows: usize,
    pub features: usize,
    pub config: BenchmarkConfig,
    /// Label-based fairness of the full loaded dataset.
    pub labels: FairnessReport,
    pub repetitions: Vec<BenchmarkRepetition>,
    pub original_dir: Summary,
    pub debiased_dir: Summary,
    /// Mean of per-repetition `debiased DIR - original DIR`.
    pub gain: Summary,
}

fn dir_summary(name: &str, values: &[f64]) -> Summary {
    let stats = mean_std(values);
    Summary {
        method: name.to_string(),
        metric: "dir".to_string(),
        n: values.len(),
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
    }
}

/// Splits the data, debiases only the training rows with FairLabel, and
/// compares prediction DIR on the test rows of a model trained on the
/// original labels against one trained on the debiased labels.
pub fn run_benchmark_experiment<T: Scalar>(
    name: &str,
    ds: &TabularDataset<T>,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkResult> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidSpec("repetitions must be at least 1".into()));
    }
    cfg.fairlabel.validate()?;
    let labels = FairnessReport::compute(Source::Labels, ds.labels(), &ds.groups(), None)?;
    let reps = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| -> Result<BenchmarkRepetition> {
            let seed = cfg.base_seed.wrapping_add(r as u64);
            let (train_pos, test_pos) = split_positions(ds.len(), cfg.test_fraction, derive_seed(seed, "split"))?;
            let train = ds.select(&train_pos);
            let test = ds.select(&test_pos);
            let fl_cfg = DebiasConfig {
                seed: derive_seed(seed, "fairlabel"),
                ..cfg.fairlabel
            };
            let (debiased, debias_report) = debias::fair_label(&train, &fl_cfg)?;
            let groups = test.groups();
            let input = |ds: &TabularDataset<T>| {
                if cfg.downstream_include_protected {
                    ds.with_group_indicator()
                } else {
                    ds.clone()
                }
            };
            let test_x = input(&test);
            let score = |train: &TabularDataset<T>| -> Result<FairnessReport> {
                let model = classify::fit(&cfg.downstream, &input(train))?;
                let pred = classify::predict(&model, test_x.features(), 0.5)?;
                FairnessReport::compute(Source::Predictions, &pred, &groups, Some(test.labels()))
            };
            Ok(BenchmarkRepetition {
                seed,
                original: score(&train)?,
                debiased: score(&debiased)?,
                debias: debias_report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let orig: Vec<f64> = reps.iter().filter_map(|r| r.original.dir).collect();
    let deb: Vec<f64> = reps.iter().filter_map(|r| r.debiased.dir).collect();
    let gains: Vec<f64> = reps
        .iter()
        .filter_map(|r| Some(r.debiased.dir? - r.original.dir?))
        .collect();
    Ok(BenchmarkResult {
        dataset: name.to_string(),
        rows: ds.len(),
        features: ds.n_features(),
        config: cfg.clone(),
        labels,
        original_dir: dir_summary("original", &orig),
        debiased_dir: dir_summary("debiased", &deb),
        gain: dir_summary("gain", &gains),
        repetitions: reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidSpec(format!("unknown format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: &str = "rate,method,metric,mean,std";

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// Long-format table `rate,method,metric,mean,std` (fixed six decimals,
/// `NA` for undefined values).
pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for res in results {
        for s in &res.summary {
            let _ = writeln!(
                out,
                "{:.6},{},{},{},{}",
                res.rate,
                s.method,
                s.metric,
                fixed(s.mean),
                fixed(s.std)
            );
        }
    }
    out
}

/// Pretty JSON with lexicographically sorted object keys.
pub fn to_sorted_json<S: Serialize>(value: &S) -> Result<String> {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled.
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn emit_results(results: &[ExperimentResult], path: impl AsRef<Path>, format: Format) -> Result<()> {
    let text = match format {
        Format::Json => to_sorted_json(&results)?,
        Format::Csv => results_csv(results),
    };
    fs::write(path, text)?;
    Ok(())
}
