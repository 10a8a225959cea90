//! CSV serialization of datasets and JSON flip logs.
//!
//! Dataset CSV layout: `row_id`, one column per feature, `label`,
//! `protected` (`majority`/`minority`), and `protected_raw` (the source value
//! the group was mapped from). Features are written in shortest round-trip
//! form, so write-then-read is lossless.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::{FlipLog, Group, GroupTag, TabularDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const RESERVED: [&str; 4] = ["row_id", "label", "protected", "protected_raw"];

pub fn write_dataset_csv<T: Scalar, W: Write>(ds: &TabularDataset<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row_id".to_string()];
    header.extend(ds.feature_names().iter().cloned());
    header.extend(["label", "protected", "protected_raw"].map(String::from));
    w.write_record(&header)?;
    let x = ds.features();
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.len() {
        record.clear();
        record.push(ds.row_ids()[i].to_string());
        record.extend(x.row(i).iter().map(|v| v.to_string()));
        record.push(ds.labels()[i].to_string());
        let tag = &ds.protected()[i];
        record.push(tag.group.to_string());
        record.push(tag.raw.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<T: Scalar, R: Read>(input: R, provenance: &str) -> Result<TabularDataset<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("row_id") {
        return Err(Error::Schema("first column must be row_id".into()));
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let label_col = find("label").ok_or_else(|| Error::Schema("missing label column".into()))?;
    let group_col = find("protected").ok_or_else(|| Error::Schema("missing protected column".into()))?;
    let raw_col = find("protected_raw");
    let feature_cols: Vec<usize> = (1..header.len())
        .filter(|&j| !RESERVED.contains(&header[j].as_str()))
        .collect();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Schema(format!("data row {}: bad {what}", line + 1));
        ids.push(rec[0].trim().parse::<u64>().map_err(|_| bad("row_id"))?);
        for &j in &feature_cols {
            let v: f64 = rec[j].trim().parse().map_err(|_| bad(&header[j]))?;
            values.push(T::of(v));
        }
        labels.push(match rec[label_col].trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label")),
        });
        let group: Group = rec[group_col].parse().map_err(|_| bad("protected"))?;
        let raw = raw_col.map_or(group.as_str(), |c| &rec[c]);
        tags.push(GroupTag::new(group, raw));
    }
    let x = Array2::from_shape_vec((ids.len(), feature_cols.len()), values).expect("row-major fill");
    let names = feature_cols.iter().map(|&j| header[j].clone()).collect();
    TabularDataset::new(ids, x, names, labels, tags, provenance)
}

pub fn save_dataset<T: Scalar>(ds: &TabularDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset_csv(ds, fs::File::create(path)?)
}

pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<TabularDataset<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => e.into(),
    })?;
    read_dataset_csv(file, &path.display().to_string())
}

pub fn save_flip_log(log: &FlipLog, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, log.to_json()? + "\n")?;
    Ok(())
}

pub fn load_flip_log(path: impl AsRef<Path>) -> Result<FlipLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => e.into(),
    })?;
    FlipLog::from_json(path.display().to_string(), &text)
}
