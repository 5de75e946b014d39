use std::collections::BTreeMap;

use rand::Rng;

use super::TabularDataset;
use crate::error::{Error, Result};
use crate::rng;

/// `n` row indices drawn i.i.d. uniformly from `0..len`.
pub fn indices_with_replacement<R: Rng>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..len)).collect()
}

/// The first `k` entries of a seeded partial Fisher-Yates shuffle of `pool`:
/// a simple random sample without replacement, in draw order.
pub fn sample_without_replacement<T: Copy, R: Rng>(pool: &[T], k: usize, rng: &mut R) -> Vec<T> {
    let mut items = pool.to_vec();
    let k = k.min(items.len());
    for i in 0..k {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    items.truncate(k);
    items
}

/// Draws `n` rows i.i.d. uniformly, with replacement.
pub fn sample_with_replacement(ds: &TabularDataset, n: usize, seed: u64) -> Result<TabularDataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let mut rng = rng::stream(seed, "sample_with_replacement", 0);
    Ok(ds.select(&indices_with_replacement(ds.len(), n, &mut rng)))
}

/// Simple random samples without replacement within each stratum, concatenated
/// in stratum-name order. `strata[i]` labels row `i`.
pub fn stratified_sample(
    ds: &TabularDataset,
    strata: &[String],
    allocation: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<TabularDataset> {
    if strata.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: strata.len(),
        });
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in strata.iter().enumerate() {
        members.entry(label.as_str()).or_default().push(i);
    }

    let mut rows = Vec::with_capacity(allocation.values().sum());
    for (index, (name, &count)) in allocation.iter().enumerate() {
        let pool = members.get(name.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if count > pool.len() {
            return Err(Error::AllocationExceedsStratum {
                stratum: name.clone(),
                requested: count,
                available: pool.len(),
            });
        }
        let mut rng = rng::stream(seed, "stratified_sample", index as u64);
        rows.extend(sample_without_replacement(pool, count, &mut rng));
    }
    Ok(ds.select(&rows))
}
