use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the bundled California Housing file. The last column is
/// the response, median house value in units of $100,000.
pub const CALIFORNIA_SCHEMA: [&str; 9] = [
    "MedInc",
    "HouseAge",
    "AveRooms",
    "AveBedrms",
    "Population",
    "AveOccup",
    "Latitude",
    "Longitude",
    "MedHouseVal",
];

/// A table of `n` records with `d` real features and one real response.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    ids: Vec<u64>,
    feature_names: Vec<String>,
    target_name: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TabularDataset {
    pub fn new(
        ids: Vec<u64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if ids.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: y.len(),
            });
        }
        if x.len() != y.len() * d {
            return Err(Error::DimensionMismatch {
                expected: y.len() * d,
                found: x.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("TabularDataset::new"));
        }
        Ok(TabularDataset {
            ids,
            feature_names,
            target_name: target_name.into(),
            x,
            y,
        })
    }

    /// Builds a dataset from feature rows, numbering records from zero.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        let ids = (0..rows.len() as u64).collect();
        TabularDataset::new(ids, names, "y", rows.concat(), y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.x[i * d..(i + 1) * d]
    }

    /// Values of feature `j` across all records.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().skip(j).step_by(self.n_features()).copied().collect()
    }

    /// A new dataset holding the given rows, in order; repeats allowed.
    pub fn select(&self, rows: &[usize]) -> TabularDataset {
        let d = self.n_features();
        let mut x = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        TabularDataset {
            ids: rows.iter().map(|&i| self.ids[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// The dataset without row `skip`.
    pub fn without_row(&self, skip: usize) -> TabularDataset {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != skip).collect();
        self.select(&keep)
    }
}

/// Loads a headered CSV whose columns must equal `schema` in order. The
/// column named `target` becomes the response; the rest are features.
pub fn load_tabular_csv(path: impl AsRef<Path>, schema: &[&str], target: &str) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tabular_csv(file, schema, target)
}

pub fn read_tabular_csv<R: std::io::Read>(reader: R, schema: &[&str], target: &str) -> Result<TabularDataset> {
    let target_idx = schema
        .iter()
        .position(|c| *c == target)
        .ok_or_else(|| Error::InvalidArgument(format!("target {target:?} not in schema")))?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() != schema.len() || header.iter().zip(schema).any(|(h, s)| h != s) {
        return Err(Error::SchemaMismatch {
            expected: schema.iter().map(|s| s.to_string()).collect(),
            found: header,
        });
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != schema.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", schema.len(), record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: schema[col].to_string(),
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: schema[col].to_string(),
                });
            }
            if col == target_idx {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "no data rows".into(),
        });
    }

    let feature_names = schema
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, s)| s.to_string())
        .collect();
    let ids = (0..y.len() as u64).collect();
    TabularDataset::new(ids, feature_names, target, x, y)
}

/// Loads the bundled California Housing file.
pub fn load_california(path: impl AsRef<Path>) -> Result<TabularDataset> {
    load_tabular_csv(path, &CALIFORNIA_SCHEMA, "MedHouseVal")
}
