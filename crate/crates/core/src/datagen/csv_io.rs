use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which columns to read and how to turn label cells into class ids. With an
/// empty mapping, label cells must be non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    #[serde(default)]
    pub label_mapping: BTreeMap<String, usize>,
    #[serde(default)]
    pub n_classes: Option<usize>,
}

impl CsvSchema {
    pub fn new(features: &[&str], label: &str) -> Self {
        CsvSchema {
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            label_column: label.into(),
            label_mapping: BTreeMap::new(),
            n_classes: None,
        }
    }

    pub fn with_mapping(mut self, pairs: &[(&str, usize)]) -> Self {
        self.label_mapping = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    pub fn with_classes(mut self, n: usize) -> Self {
        self.n_classes = Some(n);
        self
    }

    fn label_of(&self, cell: &str) -> Result<usize> {
        if self.label_mapping.is_empty() {
            cell.trim()
                .parse()
                .map_err(|_| Error::UnmappableLabel(cell.to_string()))
        } else {
            self.label_mapping
                .get(cell)
                .copied()
                .ok_or_else(|| Error::UnmappableLabel(cell.to_string()))
        }
    }

    fn name_of(&self, class: usize) -> String {
        self.label_mapping
            .iter()
            .find(|(_, &v)| v == class)
            .map_or_else(|| class.to_string(), |(k, _)| k.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    /// Rows dropped for an empty, non-numeric or non-finite feature cell.
    pub dropped: usize,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|n| column(&headers, n))
        .collect::<Result<_>>()?;
    let label_idx = column(&headers, &schema.label_column)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let parsed: Option<Vec<f64>> = feature_idx
            .iter()
            .map(|&j| {
                record
                    .get(j)
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        match parsed {
            Some(row) => {
                labels.push(schema.label_of(record.get(label_idx).unwrap_or(""))?);
                rows.push(row);
            }
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyAfterCleaning { dropped });
    }
    let inferred = labels
        .iter()
        .copied()
        .chain(schema.label_mapping.values().copied())
        .max()
        .unwrap_or(0)
        + 1;
    let n_classes = schema.n_classes.unwrap_or(inferred);
    let features = Matrix::from_rows(&rows)?;
    Ok(LoadedCsv {
        dataset: Dataset::new(features, labels, n_classes)?,
        dropped,
    })
}

/// Writes `ds` with the schema's column names. Values use the shortest
/// representation that parses back to the same bits.
pub fn save_csv(ds: &Dataset, schema: &CsvSchema, path: impl AsRef<Path>) -> Result<()> {
    if schema.feature_columns.len() != ds.n_features() {
        return Err(Error::ShapeMismatch {
            expected: ds.n_features(),
            got: schema.feature_columns.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = schema.feature_columns.clone();
    header.push(schema.label_column.clone());
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(schema.name_of(ds.labels()[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
