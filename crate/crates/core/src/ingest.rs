//! Loaders for the Adult, German Credit and Compas benchmark files.
//!
//! Each dataset is described by a [`DatasetRecipe`]: which columns to read,
//! how the target and protected attribute are binarized, which rows are
//! filtered, and which values count as missing. Categorical columns are
//! one-hot encoded with the alphabetically first level dropped; numeric
//! columns pass through unchanged. Row ids are the zero-based record index
//! in the source file(s), so a loaded row can always be traced back.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupTag, TabularDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Adult,
    GermanCredit,
    Compas,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Adult => "adult",
            DatasetName::GermanCredit => "german",
            DatasetName::Compas => "compas",
        }
    }
}

impl std::str::FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adult" | "uci_adult" => Ok(DatasetName::Adult),
            "german" | "german_credit" => Ok(DatasetName::GermanCredit),
            "compas" => Ok(DatasetName::Compas),
            other => Err(Error::InvalidSpec(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    Comma,
    /// Runs of spaces or tabs.
    Whitespace,
    /// Whitespace if the first data line has no comma, otherwise comma.
    Detect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: Kind,
}

impl Column {
    fn numeric(name: &str) -> Self {
        Column {
            name: name.to_string(),
            kind: Kind::Numeric,
        }
    }

    fn categorical(name: &str) -> Self {
        Column {
            name: name.to_string(),
            kind: Kind::Categorical,
        }
    }
}

/// Row filter applied before missing-value handling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "filter", rename_all = "snake_case")]
pub enum RowFilter {
    /// Keep rows whose numeric value lies in `[min, max]`; empty or
    /// unparseable values are dropped.
    Range {
        column: String,
        min: f64,
        max: f64,
    },
    NotEqual {
        column: String,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub name: DatasetName,
    pub delimiter: Delimiter,
    /// Column names for header-less files; `None` means the first line is a
    /// header.
    pub schema: Option<Vec<String>>,
    /// Lines starting with this byte are skipped.
    pub comment: Option<char>,
    /// Attributes forming the feature matrix, in order. May include the
    /// protected column; it is used only when `include_protected` is set.
    pub features: Vec<Column>,
    pub target: String,
    /// Target values encoded as label 1 (compared after trimming a trailing
    /// `.`).
    pub favorable: Vec<String>,
    pub protected: String,
    pub majority: Vec<String>,
    /// Minority values. `None` makes every non-majority value Minority;
    /// otherwise rows matching neither list are excluded.
    pub minority: Option<Vec<String>>,
    pub filters: Vec<RowFilter>,
    /// Values treated as missing.
    pub missing: Vec<String>,
    pub missing_policy: MissingPolicy,
    pub include_protected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop rows with a missing value in any used column.
    #[default]
    DropRow,
    /// Keep the marker as an ordinary level of categorical columns. Missing
    /// numeric, target or protected values still drop the row.
    KeepAsLevel,
}

const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const ADULT_NUMERIC: [&str; 6] = [
    "age",
    "fnlwgt",
    "education-num",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
];

const GERMAN_NUMERIC: [usize; 7] = [2, 5, 8, 11, 13, 16, 18];

/// Which Compas rows are kept and how race is binarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompasMode {
    /// Caucasian is Majority, every other race Minority.
    #[default]
    CaucasianVsRest,
    /// Only Caucasian (Majority) and African-American (Minority) rows.
    AfricanAmericanVsCaucasian,
}

fn strings(values: &[&str]) -> Vec<String> {
    values.iter().map(|s| s.to_string()).collect()
}

impl DatasetRecipe {
    pub fn adult() -> Self {
        DatasetRecipe {
            name: DatasetName::Adult,
            delimiter: Delimiter::Comma,
            schema: Some(strings(&ADULT_COLUMNS)),
            comment: Some('|'),
            features: ADULT_COLUMNS[..14]
                .iter()
                .map(|&c| {
                    if ADULT_NUMERIC.contains(&c) {
                        Column::numeric(c)
                    } else {
                        Column::categorical(c)
                    }
                })
                .collect(),
            target: "income".into(),
            favorable: strings(&[">50K"]),
            protected: "sex".into(),
            majority: strings(&["Male"]),
            minority: Some(strings(&["Female"])),
            filters: Vec::new(),
            missing: strings(&["?"]),
            missing_policy: MissingPolicy::DropRow,
            include_protected: false,
        }
    }

    pub fn german() -> Self {
        let names: Vec<String> = (1..=21)
            .map(|k| if k == 21 { "class".into() } else { format!("A{k}") })
            .collect();
        DatasetRecipe {
            name: DatasetName::GermanCredit,
            delimiter: Delimiter::Detect,
            features: names[..20]
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    if GERMAN_NUMERIC.contains(&(j + 1)) {
                        Column::numeric(n)
                    } else {
                        Column::categorical(n)
                    }
                })
                .collect(),
            schema: Some(names),
            comment: None,
            target: "class".into(),
            favorable: strings(&["1"]),
            protected: "A9".into(),
            // A91 divorced/separated male, A93 single male, A94 married/widowed male;
            // A92 and A95 are the female codes.
            majority: strings(&["A91", "A93", "A94"]),
            minority: Some(strings(&["A92", "A95"])),
            filters: Vec::new(),
            missing: Vec::new(),
            missing_policy: MissingPolicy::DropRow,
            include_protected: false,
        }
    }

    pub fn compas(mode: CompasMode) -> Self {
        let features = vec![
            Column::categorical("sex"),
            Column::numeric("age"),
            Column::categorical("age_cat"),
            Column::categorical("race"),
            Column::numeric("juv_fel_count"),
            Column::numeric("juv_misd_count"),
            Column::numeric("juv_other_count"),
            Column::numeric("priors_count"),
            Column::categorical("c_charge_degree"),
            Column::categorical("c_charge_desc"),
        ];
        let ne = |column: &str, value: &str| RowFilter::NotEqual {
            column: column.into(),
            value: value.into(),
        };
        DatasetRecipe {
            name: DatasetName::Compas,
            delimiter: Delimiter::Comma,
            schema: None,
            comment: None,
            features,
            target: "two_year_recid".into(),
            favorable: strings(&["0"]),
            protected: "race".into(),
            majority: strings(&["Caucasian"]),
            minority: match mode {
                CompasMode::CaucasianVsRest => None,
                CompasMode::AfricanAmericanVsCaucasian => Some(strings(&["African-American"])),
            },
            filters: vec![
                RowFilter::Range {
                    column: "days_b_screening_arrest".into(),
                    min: -30.0,
                    max: 30.0,
                },
                ne("is_recid", "-1"),
                ne("c_charge_degree", "O"),
                ne("score_text", "N/A"),
            ],
            missing: strings(&[""]),
            missing_policy: MissingPolicy::DropRow,
            include_protected: false,
        }
    }

    pub fn for_name(name: DatasetName) -> Self {
        match name {
            DatasetName::Adult => DatasetRecipe::adult(),
            DatasetName::GermanCredit => DatasetRecipe::german(),
            DatasetName::Compas => DatasetRecipe::compas(CompasMode::default()),
        }
    }

    /// Default file names tried when a loader is given a directory.
    fn default_files(&self) -> &'static [&'static str] {
        match self.name {
            DatasetName::Adult => &["adult.data", "adult.test"],
            DatasetName::GermanCredit => &["german.data"],
            DatasetName::Compas => &["compas-scores-two-years.csv"],
        }
    }

    /// Resolves `path` to the source files: the file itself, or the default
    /// file names inside a directory (at least the first must exist).
    pub fn source_files(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if path.is_file() {
            return Ok(vec![path.to_path_buf()]);
        }
        if !path.is_dir() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let files = self.default_files();
        let first = path.join(files[0]);
        if !first.is_file() {
            return Err(Error::FileNotFound(first));
        }
        Ok(files.iter().map(|f| path.join(f)).filter(|p| p.is_file()).collect())
    }

    pub fn load<T: Scalar>(&self, path: impl AsRef<Path>) -> Result<Ingested<T>> {
        let path = path.as_ref();
        let files = self.source_files(path)?;
        let mut table = RawTable::default();
        for file in &files {
            let text = fs::read_to_string(file)?;
            table.append(self.parse(&text)?)?;
        }
        self.build(&table, &format!("{}:{}", self.name.as_str(), path.display()))
    }

    /// Splits text into records according to the recipe's format.
    pub fn parse(&self, text: &str) -> Result<RawTable> {
        let delimiter = match self.delimiter {
            Delimiter::Detect => {
                let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                if first.contains(',') {
                    Delimiter::Comma
                } else {
                    Delimiter::Whitespace
                }
            }
            d => d,
        };
        let mut rows = Vec::new();
        match delimiter {
            Delimiter::Whitespace => {
                for line in text.lines() {
                    if line.trim().is_empty() || self.comment.is_some_and(|c| line.starts_with(c)) {
                        continue;
                    }
                    rows.push(line.split_whitespace().map(str::to_string).collect());
                }
            }
            _ => {
                let mut reader = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .flexible(true)
                    .trim(csv::Trim::All)
                    .comment(self.comment.map(|c| c as u8))
                    .from_reader(text.as_bytes());
                for rec in reader.records() {
                    let rec = rec?;
                    if rec.len() == 1 && rec[0].is_empty() {
                        continue;
                    }
                    rows.push(rec.iter().map(str::to_string).collect());
                }
            }
        }
        let header = match &self.schema {
            Some(names) => names.clone(),
            None => {
                if rows.is_empty() {
                    return Err(Error::Schema(format!("{}: missing header line", self.name.as_str())));
                }
                rows.remove(0)
            }
        };
        for (k, row) in rows.iter().enumerate() {
            let row: &Vec<String> = row;
            if row.len() != header.len() {
                return Err(Error::Schema(format!(
                    "{}: record {k} has {} fields, expected {}",
                    self.name.as_str(),
                    row.len(),
                    header.len()
                )));
            }
        }
        Ok(RawTable { header, rows })
    }

    fn column(&self, table: &RawTable, name: &str) -> Result<usize> {
        // First occurrence wins; the Compas file repeats some column names.
        table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: column {name:?} not found", self.name.as_str())))
    }

    fn group_of(&self, value: &str) -> Option<Group> {
        if self.majority.iter().any(|m| m == value) {
            return Some(Group::Majority);
        }
        match &self.minority {
            None => Some(Group::Minority),
            Some(list) if list.iter().any(|m| m == value) => Some(Group::Minority),
            Some(_) => None,
        }
    }

    /// Applies filters, binarization, missing-value policy and encoding.
    pub fn build<T: Scalar>(&self, table: &RawTable, provenance: &str) -> Result<Ingested<T>> {
        let target = self.column(table, &self.target)?;
        let protected = self.column(table, &self.protected)?;
        let features: Vec<(&Column, usize)> = self
            .features
            .iter()
            .filter(|c| self.include_protected || c.name != self.protected)
            .map(|c| Ok((c, self.column(table, &c.name)?)))
            .collect::<Result<_>>()?;
        let filters = self
            .filters
            .iter()
            .map(|f| match f {
                RowFilter::Range { column, .. } | RowFilter::NotEqual { column, .. } => {
                    Ok((f, self.column(table, column)?))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut kept = Vec::new();
        let mut filtered = 0;
        let mut missing = 0;
        let mut excluded_group = 0;
        'rows: for (k, row) in table.rows.iter().enumerate() {
            for &(f, j) in &filters {
                let pass = match f {
                    RowFilter::Range { min, max, .. } => row[j].parse::<f64>().is_ok_and(|v| v >= *min && v <= *max),
                    RowFilter::NotEqual { value, .. } => row[j] != *value,
                };
                if !pass {
                    filtered += 1;
                    continue 'rows;
                }
            }
            let keep_levels = self.missing_policy == MissingPolicy::KeepAsLevel;
            let used = features
                .iter()
                .filter(|(c, _)| !(keep_levels && c.kind == Kind::Categorical))
                .map(|&(_, j)| j)
                .chain([target, protected]);
            if used.into_iter().any(|j| self.missing.contains(&row[j])) {
                missing += 1;
                continue;
            }
            let Some(group) = self.group_of(&row[protected]) else {
                excluded_group += 1;
                continue;
            };
            kept.push((k, group));
        }
        if kept.is_empty() {
            return Err(Error::EmptyAfterCleaning);
        }

        // Encoding plan: numeric columns map to one output column each,
        // categoricals to one column per level except the first.
        let mut names = Vec::new();
        let mut plan = Vec::new();
        for &(col, j) in &features {
            match col.kind {
                Kind::Numeric => {
                    plan.push(Encoding::Numeric(j));
                    names.push(col.name.clone());
                }
                Kind::Categorical => {
                    let levels: BTreeSet<&str> = kept.iter().map(|&(k, _)| table.rows[k][j].as_str()).collect();
                    let levels: Vec<String> = levels.into_iter().skip(1).map(str::to_string).collect();
                    names.extend(levels.iter().map(|l| format!("{}={l}", col.name)));
                    plan.push(Encoding::OneHot(j, levels));
                }
            }
        }

        let width = names.len();
        let mut x = Array2::<T>::zeros((kept.len(), width));
        let mut ids = Vec::with_capacity(kept.len());
        let mut labels = Vec::with_capacity(kept.len());
        let mut tags = Vec::with_capacity(kept.len());
        for (i, &(k, group)) in kept.iter().enumerate() {
            let row = &table.rows[k];
            let mut c = 0;
            for enc in &plan {
                match enc {
                    Encoding::Numeric(j) => {
                        let v: f64 = row[*j].parse().map_err(|_| {
                            Error::Schema(format!("record {k}: non-numeric {:?} in {}", row[*j], table.header[*j]))
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Schema(format!(
                                "record {k}: non-finite value in {}",
                                table.header[*j]
                            )));
                        }
                        x[[i, c]] = T::of(v);
                        c += 1;
                    }
                    Encoding::OneHot(j, levels) => {
                        if let Ok(pos) = levels.binary_search(&row[*j]) {
                            x[[i, c + pos]] = T::one();
                        }
                        c += levels.len();
                    }
                }
            }
            ids.push(k as u64);
            let y = row[target].trim_end_matches('.');
            labels.push(u8::from(self.favorable.iter().any(|f| f == y)));
            tags.push(GroupTag::new(group, row[protected].as_str()));
        }
        let dataset = TabularDataset::new(ids, x, names, labels, tags, provenance)?;
        Ok(Ingested {
            dataset,
            raw_records: table.rows.len(),
            filtered,
            dropped_missing: missing,
            excluded_group,
            attributes: features.len(),
        })
    }
}

enum Encoding {
    Numeric(usize),
    OneHot(usize, Vec<String>),
}

/// Source records as strings, before any cleaning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    fn append(&mut self, other: RawTable) -> Result<()> {
        if self.header.is_empty() {
            *self = other;
            return Ok(());
        }
        if self.header != other.header {
            return Err(Error::Schema("source files disagree on columns".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }
}

/// A loaded dataset plus cleaning counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub dataset: TabularDataset<T>,
    /// Records in the source file(s) before any filtering.
    pub raw_records: usize,
    pub filtered: usize,
    pub dropped_missing: usize,
    /// Rows whose protected value is in neither group.
    pub excluded_group: usize,
    /// Attributes encoded into the feature matrix (before one-hot expansion).
    pub attributes: usize,
}

impl<T: Scalar> Ingested<T> {
    /// Count of each distinct raw protected value among kept rows.
    pub fn protected_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for tag in self.dataset.protected() {
            *out.entry(tag.raw.to_string()).or_insert(0) += 1;
        }
        out
    }
}

/// Adult census income: a single file or a directory holding `adult.data`
/// and optionally `adult.test`.
pub fn load_adult(path: impl AsRef<Path>) -> Result<TabularDataset<f64>> {
    Ok(DatasetRecipe::adult().load(path)?.dataset)
}

pub fn load_german(path: impl AsRef<Path>) -> Result<TabularDataset<f64>> {
    Ok(DatasetRecipe::german().load(path)?.dataset)
}

pub fn load_compas(path: impl AsRef<Path>) -> Result<TabularDataset<f64>> {
    Ok(DatasetRecipe::compas(CompasMode::default()).load(path)?.dataset)
}

pub fn load_named(name: DatasetName, path: impl AsRef<Path>) -> Result<Ingested<f64>> {
    DatasetRecipe::for_name(name).load(path)
}
