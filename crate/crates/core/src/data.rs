//! Tabular data model: datasets with explicit row identity, group tags, and
//! label-flip logs.
//!
//! Datasets are immutable values. Every transform returns a new dataset so the
//! clean, biased, and debiased versions of the same rows can sit side by side.
//! Rows are addressed by `row_id`, never by position, so flip logs stay valid
//! across partitioning, splitting, and concatenation.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Majority,
    Minority,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Majority => "majority",
            Group::Minority => "minority",
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::Majority => Group::Minority,
            Group::Minority => Group::Majority,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "majority" | "maj" => Ok(Group::Majority),
            "minority" | "min" => Ok(Group::Minority),
            other => Err(Error::InvalidSpec(format!("unknown group {other:?}"))),
        }
    }
}

/// A binary group plus the raw protected-attribute value it was mapped from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupTag {
    pub group: Group,
    pub raw: Arc<str>,
}

impl GroupTag {
    pub fn new(group: Group, raw: impl Into<Arc<str>>) -> Self {
        GroupTag { group, raw: raw.into() }
    }

    /// Tag whose raw value is just the group name.
    pub fn plain(group: Group) -> Self {
        GroupTag::new(group, group.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "0to1")]
    ZeroToOne,
    #[serde(rename = "1to0")]
    OneToZero,
}

impl Direction {
    pub fn inverse(self) -> Direction {
        match self {
            Direction::ZeroToOne => Direction::OneToZero,
            Direction::OneToZero => Direction::ZeroToOne,
        }
    }

    /// Label a row must carry before a flip in this direction.
    pub fn source_label(self) -> u8 {
        match self {
            Direction::ZeroToOne => 0,
            Direction::OneToZero => 1,
        }
    }

    pub fn target_label(self) -> u8 {
        1 - self.source_label()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ZeroToOne => "0to1",
            Direction::OneToZero => "1to0",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0to1" | "0->1" => Ok(Direction::ZeroToOne),
            "1to0" | "1->0" => Ok(Direction::OneToZero),
            other => Err(Error::InvalidSpec(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Injected,
    Proposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flip {
    pub row_id: u64,
    pub direction: Direction,
    pub origin: Origin,
}

/// Record of label flips, either injected by a bias generator or proposed by
/// a debiaser. At most one entry per `(row_id, origin)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlipLog {
    entries: Vec<Flip>,
    keys: HashSet<(u64, Origin)>,
    pub provenance: String,
}

impl FlipLog {
    pub fn new(provenance: impl Into<String>) -> Self {
        FlipLog {
            entries: Vec::new(),
            keys: HashSet::new(),
            provenance: provenance.into(),
        }
    }

    pub fn from_entries(provenance: impl Into<String>, entries: impl IntoIterator<Item = Flip>) -> Result<Self> {
        let mut log = FlipLog::new(provenance);
        for flip in entries {
            log.push(flip)?;
        }
        Ok(log)
    }

    pub fn push(&mut self, flip: Flip) -> Result<()> {
        if !self.keys.insert((flip.row_id, flip.origin)) {
            return Err(Error::DuplicateFlip(flip.row_id));
        }
        self.entries.push(flip);
        Ok(())
    }

    pub fn extend(&mut self, other: &FlipLog) -> Result<()> {
        for flip in other.iter() {
            self.push(*flip)?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[Flip] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Flip> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same rows and origins with every direction reversed; applying it undoes
    /// the original log.
    pub fn inverted(&self) -> FlipLog {
        FlipLog {
            entries: self
                .entries
                .iter()
                .map(|f| Flip {
                    direction: f.direction.inverse(),
                    ..*f
                })
                .collect(),
            keys: self.keys.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(provenance: impl Into<String>, json: &str) -> Result<Self> {
        let entries: Vec<Flip> = serde_json::from_str(json)?;
        FlipLog::from_entries(provenance, entries)
    }
}

// Serialized as the bare entry array; provenance is not part of the format.
impl Serialize for FlipLog {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlipLog {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<Flip>::deserialize(deserializer)?;
        FlipLog::from_entries("", entries).map_err(serde::de::Error::custom)
    }
}

/// Feature matrix, binary labels, and protected-group tags, keyed by row id.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset<T> {
    row_ids: Vec<u64>,
    features: Array2<T>,
    feature_names: Vec<String>,
    labels: Vec<u8>,
    protected: Vec<GroupTag>,
    provenance: String,
}

impl<T: Scalar> TabularDataset<T> {
    pub fn new(
        row_ids: Vec<u64>,
        features: Array2<T>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        protected: Vec<GroupTag>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = row_ids.len();
        if features.nrows() != n || labels.len() != n || protected.len() != n {
            return Err(Error::InvalidDataset(format!(
                "row counts disagree: ids {n}, features {}, labels {}, protected {}",
                features.nrows(),
                labels.len(),
                protected.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for &id in &row_ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateRowId(id));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidDataset(format!("label {bad} is not binary")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(TabularDataset {
            row_ids,
            features,
            feature_names,
            labels,
            protected,
            provenance: provenance.into(),
        })
    }

    /// Dataset with sequential row ids, default column names, and every row
    /// tagged Majority.
    pub fn from_parts(features: Array2<T>, labels: Vec<u8>, provenance: impl Into<String>) -> Result<Self> {
        let n = features.nrows();
        let names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let tag = GroupTag::plain(Group::Majority);
        TabularDataset::new(
            (0..n as u64).collect(),
            features,
            names,
            labels,
            vec![tag; n],
            provenance,
        )
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn protected(&self) -> &[GroupTag] {
        &self.protected
    }

    pub fn groups(&self) -> Vec<Group> {
        self.protected.iter().map(|t| t.group).collect()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Map from row id to position.
    pub fn index(&self) -> HashMap<u64, usize> {
        self.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    pub fn count_group(&self, group: Group) -> usize {
        self.protected.iter().filter(|t| t.group == group).count()
    }

    /// New dataset holding the rows at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        TabularDataset {
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
            features: self.features.select(Axis(0), positions),
            feature_names: self.feature_names.clone(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            protected: positions.iter().map(|&i| self.protected[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn positions_of(&self, group: Group) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.protected[i].group == group).collect()
    }

    /// Same rows with replacement labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch(labels.len(), self.len()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidDataset("label is not binary".into()));
        }
        Ok(TabularDataset { labels, ..self.clone() })
    }

    /// Same rows with replacement group tags.
    pub fn with_protected(&self, protected: Vec<GroupTag>) -> Result<Self> {
        if protected.len() != self.len() {
            return Err(Error::LengthMismatch(protected.len(), self.len()));
        }
        Ok(TabularDataset {
            protected,
            ..self.clone()
        })
    }

    /// Same rows with replacement features (same width semantics are the
    /// caller's responsibility).
    pub fn with_features(&self, features: Array2<T>, feature_names: Vec<String>) -> Result<Self> {
        TabularDataset::new(
            self.row_ids.clone(),
            features,
            feature_names,
            self.labels.clone(),
            self.protected.clone(),
            self.provenance.clone(),
        )
    }

    /// Feature matrix with a trailing 0/1 minority indicator column.
    pub fn with_group_indicator(&self) -> Self {
        let n = self.len();
        let d = self.n_features();
        let mut x = Array2::zeros((n, d + 1));
        x.slice_mut(ndarray::s![.., ..d]).assign(&self.features);
        for (i, tag) in self.protected.iter().enumerate() {
            if tag.group == Group::Minority {
                x[[i, d]] = T::one();
            }
        }
        let mut names = self.feature_names.clone();
        names.push("__minority".to_string());
        TabularDataset {
            features: x,
            feature_names: names,
            ..self.clone()
        }
    }
}

/// Splits into (Majority rows, Minority rows), preserving row order and ids.
pub fn partition_by_group<T: Scalar>(ds: &TabularDataset<T>) -> Result<(TabularDataset<T>, TabularDataset<T>)> {
    let majority = ds.positions_of(Group::Majority);
    let minority = ds.positions_of(Group::Minority);
    if majority.is_empty() {
        return Err(Error::EmptyGroup("majority"));
    }
    if minority.is_empty() {
        return Err(Error::EmptyGroup("minority"));
    }
    Ok((ds.select(&majority), ds.select(&minority)))
}

/// Random (train, test) split with `round(N * test_fraction)` test rows.
/// Both halves keep the input's row order.
pub fn split_train_test<T: Scalar>(
    ds: &TabularDataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset<T>, TabularDataset<T>)> {
    let (train, test) = split_positions(ds.len(), test_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

/// Ascending (train, test) positions behind [`split_train_test`], for
/// splitting several versions of the same rows identically.
pub fn split_positions(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidFraction(test_fraction));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if (n as f64 * test_fraction).floor() < 1.0 || n_test >= n {
        return Err(Error::InvalidDataset(format!(
            "cannot split {n} rows with test fraction {test_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split_train_test"));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Rows of `a` followed by rows of `b`.
pub fn concat<T: Scalar>(a: &TabularDataset<T>, b: &TabularDataset<T>) -> Result<TabularDataset<T>> {
    if a.n_features() != b.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "{} vs {} feature columns",
            a.n_features(),
            b.n_features()
        )));
    }
    if a.feature_names != b.feature_names {
        return Err(Error::SchemaMismatch("feature names differ".into()));
    }
    let ids: HashSet<u64> = a.row_ids.iter().copied().collect();
    if let Some(&dup) = b.row_ids.iter().find(|id| ids.contains(id)) {
        return Err(Error::DuplicateRowId(dup));
    }
    let features =
        ndarray::concatenate(Axis(0), &[a.features.view(), b.features.view()]).expect("column counts checked above");
    Ok(TabularDataset {
        row_ids: a.row_ids.iter().chain(&b.row_ids).copied().collect(),
        features,
        feature_names: a.feature_names.clone(),
        labels: a.labels.iter().chain(&b.labels).copied().collect(),
        protected: a.protected.iter().chain(&b.protected).cloned().collect(),
        provenance: a.provenance.clone(),
    })
}

/// Returns a copy of `ds` with exactly the logged labels inverted.
pub fn apply_flips<T: Scalar>(ds: &TabularDataset<T>, flips: &FlipLog) -> Result<TabularDataset<T>> {
    let index = ds.index();
    let mut labels = ds.labels.clone();
    let mut touched = HashSet::with_capacity(flips.len());
    for flip in flips.iter() {
        let &pos = index.get(&flip.row_id).ok_or(Error::UnknownRowId(flip.row_id))?;
        // A row logged under both origins must not be inverted twice.
        if !touched.insert(flip.row_id) {
            return Err(Error::DuplicateFlip(flip.row_id));
        }
        if labels[pos] != flip.direction.source_label() {
            return Err(Error::DirectionMismatch {
                row_id: flip.row_id,
                direction: flip.direction.as_str(),
                label: labels[pos],
            });
        }
        labels[pos] = flip.direction.target_label();
    }
    Ok(TabularDataset { labels, ..ds.clone() })
}
