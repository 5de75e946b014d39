//! Multi-criteria comparison of alternatives: Pareto frontier, weighted
//! aggregation and AHP weights.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;
const RECIPROCAL_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// Saaty's random consistency index for k = 1..=10.
pub const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];
pub const CONSISTENCY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCriteria")]
pub struct CriteriaMatrix {
    alternatives: Vec<String>,
    criteria: Vec<Criterion>,
    /// Row-major, one row per alternative.
    scores: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCriteria {
    alternatives: Vec<String>,
    criteria: Vec<Criterion>,
    scores: Vec<Vec<f64>>,
}

impl TryFrom<RawCriteria> for CriteriaMatrix {
    type Error = Error;

    fn try_from(raw: RawCriteria) -> Result<Self> {
        CriteriaMatrix::new(raw.alternatives, raw.criteria, raw.scores)
    }
}

impl CriteriaMatrix {
    pub fn new(alternatives: Vec<String>, criteria: Vec<Criterion>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if alternatives.is_empty() || criteria.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if scores.len() != alternatives.len() {
            return Err(Error::DimensionMismatch {
                expected: alternatives.len(),
                found: scores.len(),
            });
        }
        for (i, row) in scores.iter().enumerate() {
            if row.len() != criteria.len() {
                return Err(Error::DimensionMismatch {
                    expected: criteria.len(),
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    column: criteria[j].name.clone(),
                });
            }
        }
        Ok(CriteriaMatrix {
            alternatives,
            criteria,
            scores,
        })
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    /// Score with minimize-criteria negated, so larger is always better.
    fn oriented(&self, i: usize, j: usize) -> f64 {
        match self.criteria[j].direction {
            Direction::Maximize => self.scores[i][j],
            Direction::Minimize => -self.scores[i][j],
        }
    }

    /// Whether alternative `a` dominates `b`.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        let mut strict = false;
        for j in 0..self.criteria.len() {
            let (x, y) = (self.oriented(a, j), self.oriented(b, j));
            if x < y {
                return false;
            }
            strict |= x > y;
        }
        strict
    }
}

/// Header `alternative,<criterion>[:min|:max],...`; an unsuffixed criterion
/// is maximized.
pub fn read_criteria_csv<R: Read>(reader: R) -> Result<CriteriaMatrix> {
    let mut rdr = csv::Reader::from_reader(reader);
    let criteria = rdr
        .headers()?
        .iter()
        .skip(1)
        .map(|h| {
            let (name, direction) = match h.rsplit_once(':') {
                Some((n, "min")) => (n, Direction::Minimize),
                Some((n, "max")) => (n, Direction::Maximize),
                _ => (h, Direction::Maximize),
            };
            Criterion {
                name: name.to_string(),
                direction,
            }
        })
        .collect::<Vec<_>>();
    let mut alternatives = Vec::new();
    let mut scores = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        alternatives.push(rec.get(0).unwrap_or_default().to_string());
        let values = rec
            .iter()
            .skip(1)
            .zip(&criteria)
            .map(|(v, c)| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: c.name.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(values);
    }
    CriteriaMatrix::new(alternatives, criteria, scores)
}

pub fn write_criteria_csv<W: Write>(m: &CriteriaMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["alternative".to_string()];
    header.extend(m.criteria.iter().map(|c| match c.direction {
        Direction::Maximize => format!("{}:max", c.name),
        Direction::Minimize => format!("{}:min", c.name),
    }));
    w.write_record(&header)?;
    for (a, row) in m.alternatives.iter().zip(&m.scores) {
        let mut rec = vec![a.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("criteria csv", e))?;
    Ok(())
}

/// Non-dominated alternatives in input order. Identical rows do not
/// dominate one another, so duplicates survive together.
pub fn pareto_frontier(m: &CriteriaMatrix) -> Vec<String> {
    let n = m.alternatives.len();
    (0..n)
        .filter(|&b| !(0..n).any(|a| a != b && m.dominates(a, b)))
        .map(|b| m.alternatives[b].clone())
        .collect()
}

/// Dot product of direction-adjusted scores with `weights`, keyed by
/// alternative.
pub fn weighted_aggregate(m: &CriteriaMatrix, weights: &[f64]) -> Result<BTreeMap<String, f64>> {
    if weights.len() != m.criteria.len() {
        return Err(Error::WeightDimensionMismatch {
            expected: m.criteria.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
    }
    Ok((0..m.alternatives.len())
        .map(|i| {
            let s = weights.iter().enumerate().map(|(j, w)| w * m.oriented(i, j)).sum();
            (m.alternatives[i].clone(), s)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComparison")]
pub struct ComparisonMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawComparison {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawComparison> for ComparisonMatrix {
    type Error = Error;

    fn try_from(raw: RawComparison) -> Result<Self> {
        ComparisonMatrix::new(raw.labels, raw.values)
    }
}

impl ComparisonMatrix {
    /// `values[i][j]` is how strongly criterion `i` is preferred to `j`.
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = labels.len();
        if values.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: values.len(),
            });
        }
        if let Some(row) = values.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
        for i in 0..k {
            for j in 0..k {
                let (a, b) = (values[i][j], values[j][i]);
                let ok = a.is_finite() && a > 0.0 && (a * b - 1.0).abs() <= RECIPROCAL_TOL;
                if !ok || (i == j && (a - 1.0).abs() > RECIPROCAL_TOL) {
                    return Err(Error::NonReciprocalMatrix { row: i, col: j });
                }
            }
        }
        Ok(ComparisonMatrix { labels, values })
    }

    /// Unlabelled matrix with criteria named `c0, c1, ...`.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..values.len()).map(|i| format!("c{i}")).collect();
        ComparisonMatrix::new(labels, values)
    }

    /// Built from weights as `a_ij = w_i / w_j`.
    pub fn consistent(weights: &[f64]) -> Result<Self> {
        ComparisonMatrix::from_values(weights.iter().map(|wi| weights.iter().map(|wj| wi / wj).collect()).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.values.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Header `criterion,<labels>...`, then one row per criterion.
pub fn read_comparison_csv<R: Read>(reader: R) -> Result<ComparisonMatrix> {
    let mut rdr = csv::Reader::from_reader(reader);
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        values.push(
            rec.iter()
                .skip(1)
                .zip(&labels)
                .map(|(v, c)| {
                    v.trim().parse::<f64>().map_err(|e| Error::Parse {
                        row,
                        column: c.clone(),
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    ComparisonMatrix::new(labels, values)
}

pub fn write_comparison_csv<W: Write>(c: &ComparisonMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["criterion".to_string()];
    header.extend(c.labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in c.labels.iter().zip(&c.values) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("comparison csv", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpResult {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub consistency_index: f64,
    /// Absent for k > 10, where no random index is tabulated, and 0 for k <= 2.
    pub consistency_ratio: Option<f64>,
    pub inconsistent: bool,
    pub iterations: usize,
}

/// Principal eigenvector by power iteration from the uniform vector, with
/// the L1 change between normalized iterates as stopping rule.
pub fn ahp_weights(c: &ComparisonMatrix) -> Result<AhpResult> {
    let k = c.k();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("AHP needs at least two criteria, got {k}")));
    }
    let mut w = vec![1.0 / k as f64; k];
    let mut iterations = 0;
    loop {
        if iterations == POWER_MAX_ITER {
            return Err(Error::NonConvergence(POWER_MAX_ITER));
        }
        iterations += 1;
        let mut next = c.apply(&w);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let change: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        w = next;
        if change <= POWER_TOL {
            break;
        }
    }
    let lambda_max: f64 = c.apply(&w).iter().sum();
    let ci = if k > 1 { (lambda_max - k as f64) / (k - 1) as f64 } else { 0.0 };
    let consistency_ratio = match RANDOM_INDEX.get(k - 1) {
        Some(&ri) if ri > 0.0 => Some(ci / ri),
        Some(_) => Some(0.0),
        None => None,
    };
    Ok(AhpResult {
        weights: w,
        lambda_max,
        consistency_index: ci,
        consistency_ratio,
        inconsistent: consistency_ratio.is_some_and(|cr| cr > CONSISTENCY_THRESHOLD),
        iterations,
    })
}
