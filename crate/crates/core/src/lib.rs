//! Detection and correction of directional label bias in binary
//! classification data.
//!
//! The crate provides the debiasers ([`debias`]), a biased synthetic data
//! framework with ground-truth flip logs ([`synth`]), fairness and
//! flip-quality metrics ([`metrics`]), self-contained classifiers
//! ([`classify`]), loaders for three public benchmarks ([`ingest`]) and the
//! experiment pipelines that tie them together ([`harness`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix it to `f64`, which is what the CLI and experiments use.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod data;
pub mod debias;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use data::{
    apply_flips, concat, partition_by_group, split_positions, split_train_test, Direction, Flip, FlipLog, Group,
    GroupTag, Origin,
};
pub use error::{Error, Result};
pub use scalar::{Rate, Scalar};

pub type Dataset = data::TabularDataset<f64>;
pub type Dataset32 = data::TabularDataset<f32>;
pub type Model = classify::ClassifierModel<f64>;
pub type Model32 = classify::ClassifierModel<f32>;
pub type Coefficients = synth::LinearCoefficients<f64>;
/// Exact rational type for rate metrics.
pub type ExactRate = num_rational::Ratio<i64>;
