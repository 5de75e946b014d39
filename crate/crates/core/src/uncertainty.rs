//! Confidence intervals and estimator-sensitivity ranges.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::indices_with_replacement;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: String,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Two-sided standard normal quantile for `level`.
fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Percentile bootstrap over `n` rows. `statistic` receives the row
/// indices of each resample; resample `b` draws from its own stream so the
/// result does not depend on evaluation order. The endpoints are the
/// `ceil(B a/2)`-th and `ceil(B (1 - a/2))`-th order statistics.
pub fn bootstrap_ci<F>(n: usize, statistic: F, resamples: usize, level: f64, seed: u64) -> Result<Interval>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if resamples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 resamples, got {resamples}")));
    }
    check_level(level)?;
    let mut values = Vec::with_capacity(resamples);
    for b in 0..resamples {
        let idx = indices_with_replacement(n, n, &mut rng::stream(seed, "bootstrap", b as u64));
        match statistic(&idx) {
            Some(v) if v.is_finite() => values.push(v),
            _ => return Err(Error::DegenerateStatistic(b)),
        }
    }
    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let rank = |q: f64| ((resamples as f64 * q).ceil() as usize).clamp(1, resamples) - 1;
    Ok(Interval {
        lo: values[rank(alpha / 2.0)],
        hi: values[rank(1.0 - alpha / 2.0)],
        level,
        method: "percentile-bootstrap".into(),
    })
}

/// Wilson score interval for a binomial proportion.
pub fn binomial_interval(successes: u64, trials: u64, level: f64) -> Result<Interval> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidArgument(format!("need 0 <= successes <= trials, trials >= 1 (got {successes}/{trials})")));
    }
    check_level(level)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_value(level);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(Interval {
        lo: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
        hi: if successes == trials { 1.0 } else { (centre + half).min(1.0) },
        level,
        method: "wilson".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEstimate {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRange {
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    /// Sorted by label.
    pub table: Vec<LabeledEstimate>,
}

pub fn sensitivity_range(estimates: &[(String, f64)]) -> Result<SensitivityRange> {
    if estimates.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut table: Vec<LabeledEstimate> = estimates
        .iter()
        .map(|(label, value)| LabeledEstimate {
            label: label.clone(),
            value: *value,
        })
        .collect();
    table.sort_by(|a, b| a.label.cmp(&b.label).then(a.value.total_cmp(&b.value)));
    let min = table.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
    let max = table.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(SensitivityRange {
        min,
        max,
        spread: max - min,
        table,
    })
}
