//! Synthetic classification data with known, injected label bias.
//!
//! Three clean families (linear/logistic, Gaussian clusters on hypercube
//! vertices, Gaussian quantile shells), an independent protected-attribute
//! assignment, and unidirectional bias injection whose every flip is logged.
//! All generators are pure functions of their spec.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::classify::logistic::sigmoid;
use crate::data::{Direction, Flip, FlipLog, Group, GroupTag, Origin, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGeneratorSpec {
    pub n_samples: usize,
    pub n_features: usize,
    /// Fraction of rows whose label is a fair coin instead of the linear rule.
    pub p_noise: f64,
    /// Std of additive Gaussian noise on features, applied after labelling.
    #[serde(default)]
    pub feature_noise_std: f64,
    pub seed: u64,
}

impl LinearGeneratorSpec {
    pub fn new(n_samples: usize, n_features: usize, p_noise: f64, seed: u64) -> Self {
        LinearGeneratorSpec {
            n_samples,
            n_features,
            p_noise,
            feature_noise_std: 0.0,
            seed,
        }
    }

    /// Rows labelled by the deterministic rule.
    pub fn n_clean(&self) -> usize {
        (self.n_samples as f64 * (1.0 - self.p_noise)).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_noise) || self.n_features == 0 || self.n_clean() < 1 {
            return Err(Error::InvalidSpec(format!("linear generator: {self:?}")));
        }
        if !(self.feature_noise_std >= 0.0) {
            return Err(Error::InvalidSpec("feature noise std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generating coefficients of the linear family: label = `sigmoid(a.x + b) > 0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoefficients<T> {
    pub weights: Array1<T>,
    pub intercept: T,
}

impl<T: Scalar> LinearCoefficients<T> {
    pub fn label(&self, row: ndarray::ArrayView1<'_, T>) -> u8 {
        u8::from(sigmoid(row.dot(&self.weights) + self.intercept) > T::of(0.5))
    }
}

fn normal_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut Stream) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.sample::<f64, _>(StandardNormal)))
}

fn untagged<T: Scalar>(x: Array2<T>, labels: Vec<u8>, provenance: String) -> Result<TabularDataset<T>> {
    TabularDataset::from_parts(x, labels, provenance)
}

/// Clean rows first (labelled by the linear rule), then `n - n_clean` rows of
/// fresh features with coin-flip labels. Coefficients are uniform on
/// `[-1, 1]`, features standard normal, intercept zero.
pub fn generate_linear<T: Scalar>(spec: &LinearGeneratorSpec) -> Result<(TabularDataset<T>, LinearCoefficients<T>)> {
    spec.validate()?;
    let d = spec.n_features;
    let n_clean = spec.n_clean();
    let n_noise = spec.n_samples - n_clean;

    let mut coef_rng = rng::stream(spec.seed, "linear/coefficients");
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let coefficients = LinearCoefficients {
        weights: Array1::from_shape_simple_fn(d, || T::of(unit.sample(&mut coef_rng))),
        intercept: T::zero(),
    };

    let clean_x = normal_matrix::<T>(n_clean, d, &mut rng::stream(spec.seed, "linear/x"));
    let mut labels: Vec<u8> = clean_x.rows().into_iter().map(|r| coefficients.label(r)).collect();
    let noise_x = normal_matrix::<T>(n_noise, d, &mut rng::stream(spec.seed, "linear/noise_x"));
    let mut coin = rng::stream(spec.seed, "linear/noise_y");
    labels.extend((0..n_noise).map(|_| u8::from(coin.random::<bool>())));

    let mut x = ndarray::concatenate(ndarray::Axis(0), &[clean_x.view(), noise_x.view()]).expect("same width");
    if spec.feature_noise_std > 0.0 {
        let mut jitter = rng::stream(spec.seed, "linear/feature_noise");
        let s = T::of(spec.feature_noise_std);
        x.mapv_inplace(|v| v + s * T::of(jitter.sample::<f64, _>(StandardNormal)));
    }
    let ds = untagged(
        x,
        labels,
        format!(
            "linear(n={},d={d},p_noise={},seed={})",
            spec.n_samples, spec.p_noise, spec.seed
        ),
    )?;
    Ok((ds, coefficients))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterGeneratorSpec {
    pub n_samples: usize,
    #[serde(default = "ClusterGeneratorSpec::default_features")]
    pub n_features: usize,
    pub n_informative: usize,
    /// Linear combinations of the informative features.
    #[serde(default = "ClusterGeneratorSpec::default_redundant")]
    pub n_redundant: usize,
    #[serde(default = "ClusterGeneratorSpec::default_clusters")]
    pub n_clusters_per_class: usize,
    /// Side length of the hypercube whose vertices carry the cluster centres.
    pub cube_edge: f64,
    pub cluster_std: f64,
    pub seed: u64,
}

impl ClusterGeneratorSpec {
    fn default_features() -> usize {
        10
    }
    fn default_redundant() -> usize {
        2
    }
    fn default_clusters() -> usize {
        2
    }

    /// 8 informative dimensions on a cube of edge 0.5, unit cluster std,
    /// 2 redundant columns, 10 features in total.
    pub fn standard(n_samples: usize, seed: u64) -> Self {
        ClusterGeneratorSpec {
            n_samples,
            n_features: 10,
            n_informative: 8,
            n_redundant: 2,
            n_clusters_per_class: 2,
            cube_edge: 0.5,
            cluster_std: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n_informative >= 1
            && self.cube_edge > 0.0
            && self.cluster_std >= 0.0
            && self.n_clusters_per_class >= 1
            && self.n_informative + self.n_redundant <= self.n_features
            && self.n_informative < 64
            && 2 * self.n_clusters_per_class <= 1usize << self.n_informative
            && self.n_samples >= 2;
        if !ok {
            return Err(Error::InvalidSpec(format!("cluster generator: {self:?}")));
        }
        Ok(())
    }
}

/// Gaussian clusters centred on distinct vertices of a hypercube in the
/// informative subspace, each cluster sheared by its own random linear map.
/// Cluster `k` belongs to class `k % 2`; rows are spread round-robin so class
/// counts differ by at most one. Redundant columns are random linear mixes of
/// the informative ones; the rest are independent standard normal.
pub fn generate_hypercube_clusters<T: Scalar>(spec: &ClusterGeneratorSpec) -> Result<TabularDataset<T>> {
    spec.validate()?;
    let k = spec.n_informative;
    let n_clusters = 2 * spec.n_clusters_per_class;
    let mut rng = rng::stream(spec.seed, "hypercube");
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");

    let mut vertices: Vec<u64> = Vec::with_capacity(n_clusters);
    while vertices.len() < n_clusters {
        let v = if k == 63 {
            rng.random::<u64>() >> 1
        } else {
            rng.random_range(0..1u64 << k)
        };
        if !vertices.contains(&v) {
            vertices.push(v);
        }
    }
    let half = spec.cube_edge / 2.0;
    let centres: Vec<Vec<f64>> = vertices
        .iter()
        .map(|&v| (0..k).map(|j| if v >> j & 1 == 1 { half } else { -half }).collect())
        .collect();
    let shears: Vec<Array2<f64>> = (0..n_clusters)
        .map(|_| Array2::from_shape_simple_fn((k, k), || unit.sample(&mut rng)))
        .collect();
    let mix = Array2::from_shape_simple_fn((k, spec.n_redundant), || unit.sample(&mut rng));

    let n = spec.n_samples;
    let d = spec.n_features;
    let mut x = Array2::<f64>::zeros((n, d));
    let mut labels = vec![0u8; n];
    for i in 0..n {
        let c = i % n_clusters;
        labels[i] = (c % 2) as u8;
        let z: Array1<f64> =
            Array1::from_shape_simple_fn(k, || spec.cluster_std * rng.sample::<f64, _>(StandardNormal));
        let point = z.dot(&shears[c]) + Array1::from(centres[c].clone());
        x.slice_mut(ndarray::s![i, ..k]).assign(&point);
        if spec.n_redundant > 0 {
            x.slice_mut(ndarray::s![i, k..k + spec.n_redundant])
                .assign(&point.dot(&mix));
        }
        for j in k + spec.n_redundant..d {
            x[[i, j]] = rng.sample(StandardNormal);
        }
    }
    // Shuffle rows so the cluster pattern is not positional.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let x = x.select(ndarray::Axis(0), &order).mapv(T::of);
    let labels = order.iter().map(|&i| labels[i]).collect();
    untagged(
        x,
        labels,
        format!(
            "hypercube(n={n},k={k},edge={},std={},seed={})",
            spec.cube_edge, spec.cluster_std, spec.seed
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileGeneratorSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub seed: u64,
}

/// Standard normal points split into an inner and an outer shell at the
/// empirical median squared norm: the `floor(n/2)` points closest to the
/// origin are class 0, the rest class 1.
pub fn generate_gaussian_quantiles<T: Scalar>(spec: &QuantileGeneratorSpec) -> Result<TabularDataset<T>> {
    if spec.n_samples < 2 || spec.n_features == 0 {
        return Err(Error::InvalidSpec(format!("quantile generator: {spec:?}")));
    }
    let x = normal_matrix::<f64>(
        spec.n_samples,
        spec.n_features,
        &mut rng::stream(spec.seed, "quantiles"),
    );
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let mut labels = vec![1u8; spec.n_samples];
    for &i in &order[..spec.n_samples / 2] {
        labels[i] = 0;
    }
    untagged(
        x.mapv(T::of),
        labels,
        format!(
            "quantiles(n={},d={},seed={})",
            spec.n_samples, spec.n_features, spec.seed
        ),
    )
}

/// Tags each row Minority independently with probability `minority_fraction`,
/// independent of features and labels.
pub fn assign_protected<T: Scalar>(
    ds: &TabularDataset<T>,
    minority_fraction: f64,
    seed: u64,
) -> Result<TabularDataset<T>> {
    if !(minority_fraction > 0.0 && minority_fraction < 1.0) {
        return Err(Error::InvalidFraction(minority_fraction));
    }
    if ds.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let coin = Bernoulli::new(minority_fraction).expect("fraction checked");
    let mut rng = rng::stream(seed, "assign_protected");
    let minority = GroupTag::plain(Group::Minority);
    let majority = GroupTag::plain(Group::Majority);
    let tags = (0..ds.len())
        .map(|_| {
            if coin.sample(&mut rng) {
                minority.clone()
            } else {
                majority.clone()
            }
        })
        .collect();
    ds.with_protected(tags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub target: Group,
    pub direction: Direction,
    pub severity: f64,
    pub seed: u64,
}

impl BiasSpec {
    /// Negative bias against the minority group.
    pub fn against_minority(severity: f64, seed: u64) -> Self {
        BiasSpec {
            target: Group::Minority,
            direction: Direction::OneToZero,
            severity,
            seed,
        }
    }

    /// Positive bias in favour of the majority group.
    pub fn favouring_majority(severity: f64, seed: u64) -> Self {
        BiasSpec {
            target: Group::Majority,
            direction: Direction::ZeroToOne,
            severity,
            seed,
        }
    }

    pub(crate) fn stage(&self) -> String {
        format!("inject_bias/{}/{}", self.target, self.direction)
    }
}

/// Walks the rows of the target group in order and, for each row whose label
/// can move in the bias direction, flips it with probability `severity`
/// (one Bernoulli draw per eligible row). Every flip is logged as Injected.
pub fn inject_bias<T: Scalar>(ds: &TabularDataset<T>, bias: &BiasSpec) -> Result<(TabularDataset<T>, FlipLog)> {
    if !(0.0..=1.0).contains(&bias.severity) {
        return Err(Error::InvalidSpec(format!(
            "bias severity {} outside [0, 1]",
            bias.severity
        )));
    }
    let source = bias.direction.source_label();
    let eligible: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.protected()[i].group == bias.target && ds.labels()[i] == source)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleRows);
    }
    let coin = Bernoulli::new(bias.severity).expect("severity checked");
    let mut rng = rng::stream(bias.seed, &bias.stage());
    let mut labels = ds.labels().to_vec();
    let mut log = FlipLog::new(ds.provenance());
    for i in eligible {
        if coin.sample(&mut rng) {
            labels[i] = bias.direction.target_label();
            log.push(Flip {
                row_id: ds.row_ids()[i],
                direction: bias.direction,
                origin: Origin::Injected,
            })?;
        }
    }
    Ok((ds.with_labels(labels)?, log))
}
