//! The dataset currency shared by every stage: a feature matrix with
//! optional (missing) cells plus a binary label per row.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the canonical dataset CSV.
pub const CANONICAL_FEATURES: [&str; 4] = ["sex", "Female", "Panic", "Suicidal"];

pub const LABEL_COLUMN: &str = "label";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTable {
    feature_names: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    labels: Vec<u8>,
}

impl LabeledTable {
    pub fn new<S: Into<String>>(feature_names: impl IntoIterator<Item = S>) -> Self {
        Self {
            feature_names: feature_names.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Empty table with the canonical `sex,Female,Panic,Suicidal` columns.
    pub fn canonical() -> Self {
        Self::new(CANONICAL_FEATURES)
    }

    /// Builds a table from fully observed rows.
    pub fn from_dense<S: Into<String>>(
        feature_names: impl IntoIterator<Item = S>,
        rows: &[Vec<f64>],
        labels: &[u8],
    ) -> Result<Self> {
        let mut table = Self::new(feature_names);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "rows vs labels",
                left: rows.len(),
                right: labels.len(),
            });
        }
        for (row, &label) in rows.iter().zip(labels) {
            table.push(row.iter().copied().map(Some).collect(), label)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, row: Vec<Option<f64>>, label: u8) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch {
                what: "row width vs feature count",
                left: row.len(),
                right: self.feature_names.len(),
            });
        }
        if label > 1 {
            return Err(Error::NonBinaryLabel(label));
        }
        self.rows.push(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<Option<f64>>] {
        &mut self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// `[count of label 0, count of label 1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let positives = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - positives, positives]
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Option::is_none)
    }

    /// New table holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Appends every row of `other`; column names must agree.
    pub fn extend_from(&mut self, other: &LabeledTable) -> Result<()> {
        if other.feature_names != self.feature_names {
            return Err(Error::Schema(format!(
                "cannot append columns {:?} to {:?}",
                other.feature_names, self.feature_names
            )));
        }
        self.rows.extend(other.rows.iter().cloned());
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv.headers().map_err(|e| csv_error(e, 1))?.clone();
        let width = header.len();
        if width < 2 || &header[width - 1] != LABEL_COLUMN {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must end with a `{LABEL_COLUMN}` column"),
            });
        }
        let mut table = Self::new(header.iter().take(width - 1));
        for record in csv.records() {
            let record = record.map_err(|e| csv_error(e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != width {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {width} cells, found {}", record.len()),
                });
            }
            let mut row = Vec::with_capacity(width - 1);
            for cell in record.iter().take(width - 1) {
                row.push(parse_cell(cell, line)?);
            }
            let label = match &record[width - 1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("label must be 0 or 1, found `{other}`"),
                    })
                }
            };
            table.rows.push(row);
            table.labels.push(label);
        }
        Ok(table)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the table as CSV; floats use the shortest representation that
    /// parses back to the same value, missing cells are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = self.feature_names.join(",");
        line.push(',');
        line.push_str(LABEL_COLUMN);
        writeln!(out, "{line}")?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            line.clear();
            for cell in row {
                if let Some(v) = cell {
                    line.push_str(&v.to_string());
                }
                line.push(',');
            }
            line.push_str(&label.to_string());
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

fn parse_cell(cell: &str, line: u64) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            line,
            message: format!("`{cell}` is not a finite number"),
        }),
    }
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
}

/// Names and kinds of the feature columns, in table order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput("feature schema"));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Schema(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
        }
        Ok(Self { features })
    }

    /// `sex` and `Female` binary, `Panic` and `Suicidal` continuous.
    pub fn canonical() -> Self {
        let kinds = [
            FeatureKind::Binary,
            FeatureKind::Binary,
            FeatureKind::Continuous,
            FeatureKind::Continuous,
        ];
        let features = CANONICAL_FEATURES
            .iter()
            .zip(kinds)
            .map(|(name, kind)| FeatureDescriptor {
                name: name.to_string(),
                kind,
            })
            .collect();
        Self { features }
    }

    /// A column whose observed values are all 0 or 1 is binary.
    pub fn infer(table: &LabeledTable) -> Result<Self> {
        let features = table
            .feature_names()
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let binary = table
                    .rows()
                    .iter()
                    .filter_map(|r| r[j])
                    .all(|v| v == 0.0 || v == 1.0);
                FeatureDescriptor {
                    name: name.clone(),
                    kind: if binary {
                        FeatureKind::Binary
                    } else {
                        FeatureKind::Continuous
                    },
                }
            })
            .collect();
        Self::new(features)
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.features[j].kind
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn check_table(&self, table: &LabeledTable) -> Result<()> {
        let names = table.feature_names();
        if names.len() != self.features.len()
            || names.iter().zip(&self.features).any(|(a, f)| *a != f.name)
        {
            return Err(Error::Schema(format!(
                "table columns {names:?} do not match schema {:?}",
                self.names()
            )));
        }
        Ok(())
    }
}
