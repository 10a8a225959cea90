//! Histogram-based regression trees and the two tree classifiers built on
//! them: a single CART-style decision tree and gradient-boosted trees on
//! logistic loss.
//!
//! Each feature is cut into at most `max_bins` bins at training time. A split
//! "bin <= b" is stored as the raw threshold `x <= cut[b]`, so prediction
//! never needs the binner.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_samples_leaf: 1,
            max_bins: MAX_BINS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1e-3,
            max_bins: MAX_BINS,
        }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_leaf == 0 || !(2..=MAX_BINS).contains(&self.max_bins) {
            return Err(Error::InvalidSpec(format!("tree parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

impl GbtParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.rounds == 0
            || self.max_depth == 0
            || !(self.learning_rate > 0.0)
            || !(self.lambda >= 0.0)
            || !(self.min_child_weight >= 0.0)
            || !(2..=MAX_BINS).contains(&self.max_bins)
        {
            return Err(Error::InvalidSpec(format!(
                "boosting parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-feature cut points.
#[derive(Debug, Clone)]
struct Binner<T> {
    cuts: Vec<Vec<T>>,
}

impl<T: Scalar> Binner<T> {
    fn fit(x: ArrayView2<'_, T>, max_bins: usize) -> Self {
        let half = T::of(0.5);
        let cuts = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut v: Vec<T> = col.to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                let mut uniq = v.clone();
                uniq.dedup();
                if uniq.len() <= max_bins {
                    return uniq.windows(2).map(|w| (w[0] + w[1]) * half).collect();
                }
                let n = v.len();
                let mut cuts: Vec<T> = (1..max_bins)
                    .filter_map(|k| {
                        let pos = k * n / max_bins;
                        (pos > 0 && v[pos - 1] < v[pos]).then(|| (v[pos - 1] + v[pos]) * half)
                    })
                    .collect();
                cuts.dedup();
                cuts
            })
            .collect();
        Binner { cuts }
    }

    /// Column-major bin indices.
    fn transform(&self, x: ArrayView2<'_, T>) -> Vec<u8> {
        let n = x.nrows();
        let mut bins = vec![0u8; n * x.ncols()];
        for (j, col) in x.columns().into_iter().enumerate() {
            let cuts = &self.cuts[j];
            for (i, &v) in col.iter().enumerate() {
                bins[j * n + i] = cuts.partition_point(|&c| c < v) as u8;
            }
        }
        bins
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Leaf(T),
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn evaluate(&self, row: &[T]) -> T {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

struct GrowParams<T> {
    max_depth: usize,
    lambda: T,
    min_child_weight: T,
    min_samples_leaf: usize,
    /// Multiplier applied to every leaf value (the boosting shrinkage).
    shrinkage: T,
}

struct Grower<'a, T> {
    bins: &'a [u8],
    n: usize,
    binner: &'a Binner<T>,
    grad: &'a [T],
    hess: &'a [T],
    params: &'a GrowParams<T>,
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy)]
struct Bucket<T> {
    g: T,
    h: T,
    count: usize,
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn score(&self, g: T, h: T) -> T {
        g * g / (h + self.params.lambda)
    }

    fn leaf(&mut self, g: T, h: T) -> usize {
        let denom = h + self.params.lambda;
        let value = if denom > T::zero() { -g / denom } else { T::zero() };
        self.nodes.push(Node::Leaf(value * self.params.shrinkage));
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> usize {
        let (g, h) = rows.iter().fold((T::zero(), T::zero()), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let min_leaf = self.params.min_samples_leaf;
        if depth >= self.params.max_depth || rows.len() < 2 * min_leaf {
            return self.leaf(g, h);
        }

        let parent = self.score(g, h);
        let mut best: Option<(T, usize, usize)> = None;
        let zero = Bucket {
            g: T::zero(),
            h: T::zero(),
            count: 0,
        };
        for (feature, cuts) in self.binner.cuts.iter().enumerate() {
            if cuts.is_empty() {
                continue;
            }
            let col = &self.bins[feature * self.n..(feature + 1) * self.n];
            let mut hist = vec![zero; cuts.len() + 1];
            for &r in &rows {
                let b = &mut hist[col[r as usize] as usize];
                b.g = b.g + self.grad[r as usize];
                b.h = b.h + self.hess[r as usize];
                b.count += 1;
            }
            let mut left = zero;
            for (bin, bucket) in hist[..cuts.len()].iter().enumerate() {
                left.g = left.g + bucket.g;
                left.h = left.h + bucket.h;
                left.count += bucket.count;
                let right_count = rows.len() - left.count;
                if left.count < min_leaf {
                    continue;
                }
                if right_count < min_leaf {
                    break;
                }
                let (rg, rh) = (g - left.g, h - left.h);
                if left.h < self.params.min_child_weight || rh < self.params.min_child_weight {
                    continue;
                }
                let gain = self.score(left.g, left.h) + self.score(rg, rh) - parent;
                if gain > T::of(1e-12) && best.is_none_or(|(b, _, _)| gain > b) {
                    best = Some((gain, feature, bin));
                }
            }
        }

        let Some((_, feature, bin)) = best else {
            return self.leaf(g, h);
        };
        let col = &self.bins[feature * self.n..(feature + 1) * self.n];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.into_iter().partition(|&r| col[r as usize] as usize <= bin);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(T::zero()));
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold: self.binner.cuts[feature][bin],
            left,
            right,
        };
        at
    }
}

fn grow_tree<T: Scalar>(
    bins: &[u8],
    n: usize,
    binner: &Binner<T>,
    grad: &[T],
    hess: &[T],
    params: &GrowParams<T>,
) -> Tree<T> {
    let mut grower = Grower {
        bins,
        n,
        binner,
        grad,
        hess,
        params,
        nodes: Vec::new(),
    };
    grower.grow((0..n as u32).collect(), 0);
    Tree { nodes: grower.nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Raw score is a log-odds.
    Logit,
    /// Raw score is already a probability.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble<T> {
    pub base: T,
    pub trees: Vec<Tree<T>>,
    pub link: Link,
}

impl<T: Scalar> TreeEnsemble<T> {
    pub(crate) fn predict_proba(&self, x: ArrayView2<'_, T>) -> Vec<T> {
        let mut row = Vec::with_capacity(x.ncols());
        x.rows()
            .into_iter()
            .map(|r| {
                row.clear();
                row.extend(r.iter().copied());
                let raw = self.trees.iter().fold(self.base, |acc, t| acc + t.evaluate(&row));
                match self.link {
                    Link::Logit => sigmoid(raw),
                    Link::Identity => raw.max(T::zero()).min(T::one()),
                }
            })
            .collect()
    }
}

fn as_targets<T: Scalar>(y: &[u8]) -> Vec<T> {
    y.iter().map(|&v| if v == 1 { T::one() } else { T::zero() }).collect()
}

/// Single tree on squared error of the 0/1 label (variance reduction, which
/// for binary targets ranks splits the same as Gini impurity). Leaves hold the
/// positive fraction of their rows.
pub(crate) fn fit_decision_tree<T: Scalar>(
    params: &TreeParams,
    x: ArrayView2<'_, T>,
    y: &[u8],
) -> Result<TreeEnsemble<T>> {
    params.validate()?;
    if x.nrows() == 0 {
        return Err(Error::DegenerateTraining("empty training set".into()));
    }
    let binner = Binner::fit(x, params.max_bins);
    let bins = binner.transform(x);
    let grad: Vec<T> = as_targets::<T>(y).into_iter().map(|t| -t).collect();
    let hess = vec![T::one(); y.len()];
    let grow = GrowParams {
        max_depth: params.max_depth,
        lambda: T::zero(),
        min_child_weight: T::zero(),
        min_samples_leaf: params.min_samples_leaf,
        shrinkage: T::one(),
    };
    let tree = grow_tree(&bins, x.nrows(), &binner, &grad, &hess, &grow);
    Ok(TreeEnsemble {
        base: T::zero(),
        trees: vec![tree],
        link: Link::Identity,
    })
}

pub(crate) fn fit_gbt<T: Scalar>(params: &GbtParams, x: ArrayView2<'_, T>, y: &[u8]) -> Result<TreeEnsemble<T>> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::DegenerateTraining("empty training set".into()));
    }
    let target = as_targets::<T>(y);
    let eps = T::of(1e-6);
    let prior = (target.iter().copied().sum::<T>() / T::of(n as f64))
        .max(eps)
        .min(T::one() - eps);
    let base = (prior / (T::one() - prior)).ln();

    let binner = Binner::fit(x, params.max_bins);
    let bins = binner.transform(x);
    let grow = GrowParams {
        max_depth: params.max_depth,
        lambda: T::of(params.lambda),
        min_child_weight: T::of(params.min_child_weight),
        min_samples_leaf: 1,
        shrinkage: T::of(params.learning_rate),
    };

    let mut raw = vec![base; n];
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    let mut row = Vec::with_capacity(x.ncols());
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - target[i];
            hess[i] = (p * (T::one() - p)).max(T::of(1e-16));
        }
        let tree = grow_tree(&bins, n, &binner, &grad, &hess, &grow);
        for (i, r) in x.rows().into_iter().enumerate() {
            row.clear();
            row.extend(r.iter().copied());
            raw[i] = raw[i] + tree.evaluate(&row);
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        base,
        trees,
        link: Link::Logit,
    })
}
