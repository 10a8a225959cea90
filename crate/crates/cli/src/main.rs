use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use fairlabel::classify::ClassifierSpec;
use fairlabel::debias::{self, DebiasConfig, Method, ThresholdPolicy};
use fairlabel::harness::{self, BenchmarkConfig, Format, GeneratorConfig, SyntheticExperimentConfig};
use fairlabel::ingest::{CompasMode, DatasetName, DatasetRecipe};
use fairlabel::io::{load_dataset, load_flip_log, save_dataset, save_flip_log};
use fairlabel::metrics::{self, FairnessReport, Source};
use fairlabel::synth::{self, BiasSpec};
use fairlabel::{Dataset, Direction, Group};

#[derive(Parser)]
#[command(
    name = "fairlabel",
    version,
    about = "Directional label debiasing and fairness experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clean synthetic dataset.
    Generate(GenerateArgs),
    /// Inject directional label bias into one group.
    InjectBias(InjectArgs),
    /// Propose and apply label flips.
    Debias(DebiasArgs),
    /// Score flip logs and label fairness.
    Evaluate(EvaluateArgs),
    /// Run end-to-end experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Linear,
    Hypercube,
    Quantiles,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "linear")]
    family: Family,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.0)]
    p_noise: f64,
    /// Tag rows Minority with this probability (all Majority if omitted).
    #[arg(long)]
    minority_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "minority")]
    group: Group,
    #[arg(long, default_value = "1to0")]
    direction: Direction,
    #[arg(long)]
    severity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Logistic,
    Tree,
    Gbt,
}

impl Backend {
    fn spec(self, seed: u64) -> ClassifierSpec {
        let spec = match self {
            Backend::Logistic => ClassifierSpec::logistic(),
            Backend::Tree => ClassifierSpec::decision_tree(6),
            Backend::Gbt => ClassifierSpec::gbt(),
        };
        ClassifierSpec { seed, ..spec }
    }
}

#[derive(Args)]
struct DebiasArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "fairlabel")]
    method: Method,
    #[arg(long, value_enum, default_value = "gbt")]
    classifier: Backend,
    /// A fixed threshold in [0, 1], or `tune` to target unit DIR on a hold-out.
    #[arg(long, default_value = "0.5")]
    threshold: String,
    /// Run the FairMaj phase after FairMin (fairlabel only).
    #[arg(long)]
    fairmaj: bool,
    /// Give the classifier a minority-indicator column.
    #[arg(long)]
    include_protected: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset whose labels are scored (e.g. the debiased data).
    #[arg(long)]
    data: PathBuf,
    /// Reference labels for f1 (e.g. the clean data); same row ids.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    flips_injected: Option<PathBuf>,
    #[arg(long)]
    flips_proposed: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "dir,did")]
    metrics: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Experiment {
    /// Synthetic pipeline from a JSON config (default scenario if omitted).
    Synthetic(SyntheticArgs),
    /// FairLabel on a benchmark dataset.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweep these bias rates instead of the configured one.
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    /// Use 100,000 samples instead of the configured size.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    dataset: DatasetName,
    #[arg(long)]
    data_path: PathBuf,
    /// Keep only African-American and Caucasian rows (Compas).
    #[arg(long)]
    compas_strict: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let cfg = match args.family {
        Family::Linear => GeneratorConfig::Linear {
            n_samples: args.n,
            n_features: args.d,
            p_noise: args.p_noise,
            feature_noise_std: 0.0,
        },
        Family::Hypercube => match GeneratorConfig::hypercube(args.n) {
            GeneratorConfig::Hypercube {
                n_informative,
                n_redundant,
                n_clusters_per_class,
                cube_edge,
                cluster_std,
                ..
            } => GeneratorConfig::Hypercube {
                n_samples: args.n,
                n_features: args.d,
                n_informative: n_informative.min(args.d.saturating_sub(n_redundant)),
                n_redundant,
                n_clusters_per_class,
                cube_edge,
                cluster_std,
            },
            _ => unreachable!(),
        },
        Family::Quantiles => GeneratorConfig::Quantiles {
            n_samples: args.n,
            n_features: args.d,
        },
    };
    let mut ds: Dataset = cfg.generate(args.seed)?;
    if let Some(f) = args.minority_fraction {
        ds = synth::assign_protected(&ds, f, args.seed)?;
    }
    save_dataset(&ds, &args.out)?;
    Ok(())
}

fn inject(args: InjectArgs) -> Result<()> {
    let ds: Dataset = load_dataset(&args.input)?;
    let spec = BiasSpec {
        target: args.group,
        direction: args.direction,
        severity: args.severity,
        seed: args.seed,
    };
    let (biased, log) = synth::inject_bias(&ds, &spec)?;
    save_dataset(&biased, &args.out)?;
    save_flip_log(&log, &args.log)?;
    Ok(())
}

fn parse_threshold(s: &str) -> Result<ThresholdPolicy> {
    if s == "tune" {
        return Ok(ThresholdPolicy::tuned());
    }
    let threshold: f64 = s
        .parse()
        .with_context(|| format!("threshold must be a number or `tune`, got {s:?}"))?;
    Ok(ThresholdPolicy::Fixed { threshold })
}

fn run_debias(args: DebiasArgs) -> Result<()> {
    let ds: Dataset = load_dataset(&args.input)?;
    let cfg = DebiasConfig {
        threshold: parse_threshold(&args.threshold)?,
        run_fairmaj: args.fairmaj,
        include_protected: args.include_protected,
        seed: args.seed,
        ..DebiasConfig::new(args.classifier.spec(args.seed))
    };
    let (out, report) = debias::debias(&ds, args.method, &cfg)?;
    save_dataset(&out, &args.out)?;
    if let Some(path) = args.report {
        write_text(&path, &harness::to_sorted_json(&report)?)?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let ds: Dataset = load_dataset(&args.data)?;
    let injected = args.flips_injected.as_deref().map(load_flip_log).transpose()?;
    let proposed = args.flips_proposed.as_deref().map(load_flip_log).transpose()?;
    let mut out = Map::new();
    for metric in &args.metrics {
        let value = match metric.as_str() {
            "cfr" | "mfr" | "miss_rate" => {
                let (Some(inj), Some(prop)) = (&injected, &proposed) else {
                    bail!("{metric} needs --flips-injected and --flips-proposed");
                };
                match metric.as_str() {
                    "cfr" => json!(metrics::cfr::<f64>(inj, prop)?),
                    "mfr" => json!(metrics::mfr::<f64>(inj, prop)),
                    _ => json!(metrics::miss_rate::<f64>(inj, prop)?),
                }
            }
            "dir" => json!(metrics::dir::<f64>(ds.labels(), &ds.groups())?),
            "did" => json!(metrics::did::<f64>(ds.labels(), &ds.groups())?),
            "f1" => {
                let Some(path) = &args.truth else {
                    bail!("f1 needs --truth");
                };
                let truth: Dataset = load_dataset(path)?;
                if truth.row_ids() != ds.row_ids() {
                    bail!("--truth rows do not match --data rows");
                }
                json!(metrics::f1::<f64>(truth.labels(), ds.labels())?)
            }
            "report" => serde_json::to_value(FairnessReport::compute(
                Source::Labels,
                ds.labels(),
                &ds.groups(),
                None,
            )?)?,
            other => bail!("unknown metric {other:?}"),
        };
        out.insert(metric.clone(), value);
    }
    let text = harness::to_sorted_json(&Value::Object(out))?;
    match args.out {
        Some(path) => write_text(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synthetic(args: SyntheticArgs) -> Result<()> {
    let mut cfg: SyntheticExperimentConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SyntheticExperimentConfig::standard(0.2),
    };
    if args.full_scale {
        match &mut cfg.generator {
            GeneratorConfig::Linear { n_samples, .. }
            | GeneratorConfig::Hypercube { n_samples, .. }
            | GeneratorConfig::Quantiles { n_samples, .. } => *n_samples = 100_000,
        }
    }
    let results = if args.rates.is_empty() {
        vec![harness::run_synthetic_experiment(&cfg)?]
    } else {
        harness::sweep_bias_rate(&cfg, &args.rates)?
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    harness::emit_results(&results, args.out.join("results.json"), Format::Json)?;
    harness::emit_results(&results, args.out.join("results.csv"), Format::Csv)?;
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let recipe = match args.dataset {
        DatasetName::Compas if args.compas_strict => DatasetRecipe::compas(CompasMode::AfricanAmericanVsCaucasian),
        name => DatasetRecipe::for_name(name),
    };
    let ingested = recipe.load::<f64>(&args.data_path)?;
    let mut cfg: BenchmarkConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    let result = harness::run_benchmark_experiment(args.dataset.as_str(), &ingested.dataset, &cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let summary = json!({
        "dataset": result.dataset,
        "raw_records": ingested.raw_records,
        "rows": result.rows,
        "features": result.features,
        "backend": cfg.downstream.to_string(),
        "label_dir": result.labels.dir,
        "original_dir": result.original_dir.mean,
        "debiased_dir": result.debiased_dir.mean,
        "gain": result.gain.mean,
    });
    write_text(
        &args.out.join(format!("{}.json", args.dataset.as_str())),
        &harness::to_sorted_json(&result)?,
    )?;
    write_text(
        &args.out.join(format!("{}_summary.json", args.dataset.as_str())),
        &harness::to_sorted_json(&summary)?,
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::InjectBias(a) => inject(a),
        Command::Debias(a) => run_debias(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(Experiment::Synthetic(a)) => synthetic(a),
        Command::Experiment(Experiment::Benchmark(a)) => benchmark(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<fairlabel::Error>().map_or("error", |e| e.code());
            eprintln!("{}", json!({ "error": kind, "message": format!("{err:#}") }));
            ExitCode::FAILURE
        }
    }
}
