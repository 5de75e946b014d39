//! Sample-versus-population feature diagnostics.

use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};

/// Probability levels reported for every feature.
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

/// A feature is flagged as distributionally shifted when the two-sample KS
/// statistic exceeds this value.
pub const KS_FLAG_THRESHOLD: f64 = 0.1;

/// Number of fixed-width histogram bins per feature.
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiagnostics {
    pub feature: String,
    pub sample_quantiles: Vec<f64>,
    pub population_quantiles: Vec<f64>,
    pub sample_excess_kurtosis: f64,
    pub population_excess_kurtosis: f64,
    pub ks_statistic: f64,
    pub ks_flag: bool,
    /// The population extends beyond the sample maximum by more than the
    /// population's 50%-99% interquantile range.
    pub coverage_flag: bool,
    pub sample_max: f64,
    pub population_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub features: Vec<FeatureDiagnostics>,
}

impl DistributionReport {
    pub fn flagged(&self) -> impl Iterator<Item = &FeatureDiagnostics> {
        self.features.iter().filter(|f| f.ks_flag || f.coverage_flag)
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureDiagnostics> {
        self.features.iter().find(|f| f.feature == feature)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Moment-based excess kurtosis; zero for constant data.
pub fn excess_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d2 = (v - mean).powi(2);
        (m2 + d2, m4 + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Two-sample Kolmogorov-Smirnov statistic of sorted samples.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

fn sorted_column(ds: &TabularDataset, j: usize) -> Vec<f64> {
    let mut col = ds.column(j);
    col.sort_by(f64::total_cmp);
    col
}

fn check_compatible(sample: &TabularDataset, population: &TabularDataset) -> Result<()> {
    if sample.n_features() != population.n_features() {
        return Err(Error::DimensionMismatch {
            expected: population.n_features(),
            found: sample.n_features(),
        });
    }
    if sample.is_empty() || population.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn feature_distribution_report(
    sample: &TabularDataset,
    population: &TabularDataset,
) -> Result<DistributionReport> {
    check_compatible(sample, population)?;
    let features = (0..population.n_features())
        .map(|j| {
            let s = sorted_column(sample, j);
            let p = sorted_column(population, j);
            let ks = ks_statistic_sorted(&s, &p);
            let sample_max = *s.last().expect("nonempty");
            let population_max = *p.last().expect("nonempty");
            let spread = quantile_sorted(&p, 0.99) - quantile_sorted(&p, 0.50);
            FeatureDiagnostics {
                feature: population.feature_names()[j].clone(),
                sample_quantiles: QUANTILE_LEVELS.iter().map(|&q| quantile_sorted(&s, q)).collect(),
                population_quantiles: QUANTILE_LEVELS.iter().map(|&q| quantile_sorted(&p, q)).collect(),
                sample_excess_kurtosis: excess_kurtosis(&s),
                population_excess_kurtosis: excess_kurtosis(&p),
                ks_statistic: ks,
                ks_flag: ks > KS_FLAG_THRESHOLD,
                coverage_flag: population_max - sample_max > spread,
                sample_max,
                population_max,
            }
        })
        .collect();
    Ok(DistributionReport { features })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub feature: String,
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub sample_count: u64,
    pub population_count: u64,
}

fn bin_of(value: f64, lo: f64, width: f64) -> usize {
    if width == 0.0 {
        return 0;
    }
    (((value - lo) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Fixed-width histograms over each feature's population range, with counts
/// for both datasets. Values outside the range fall in the edge bins.
pub fn feature_histograms(sample: &TabularDataset, population: &TabularDataset) -> Result<Vec<HistogramBin>> {
    check_compatible(sample, population)?;
    let mut bins = Vec::with_capacity(population.n_features() * HISTOGRAM_BINS);
    for j in 0..population.n_features() {
        let pop = population.column(j);
        let lo = pop.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pop.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut sample_counts = [0u64; HISTOGRAM_BINS];
        let mut pop_counts = [0u64; HISTOGRAM_BINS];
        for v in sample.column(j) {
            sample_counts[bin_of(v, lo, width)] += 1;
        }
        for v in pop {
            pop_counts[bin_of(v, lo, width)] += 1;
        }
        let name = &population.feature_names()[j];
        for b in 0..HISTOGRAM_BINS {
            bins.push(HistogramBin {
                feature: name.clone(),
                bin: b,
                lo: lo + width * b as f64,
                hi: if b + 1 == HISTOGRAM_BINS { hi } else { lo + width * (b + 1) as f64 },
                sample_count: sample_counts[b],
                population_count: pop_counts[b],
            });
        }
    }
    Ok(bins)
}
