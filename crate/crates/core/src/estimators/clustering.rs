use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Clustering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Prf {
    /// Precision, recall and their harmonic mean from pair counts.
    pub fn from_counts(true_positive: f64, predicted: f64, actual: f64) -> Result<Self> {
        if predicted <= 0.0 {
            return Err(Error::NoPredictedPairs);
        }
        if actual <= 0.0 {
            return Err(Error::NoTruePairs);
        }
        Ok(Prf {
            precision: true_positive / predicted,
            recall: true_positive / actual,
            f_score: 2.0 * true_positive / (predicted + actual),
        })
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn check_universe(pred: &Clustering, truth: &Clustering) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::UniverseMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    Ok(())
}

/// Pair counts of a predicted clustering against the truth, from the
/// contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub true_positive: u64,
    pub predicted: u64,
    pub actual: u64,
}

pub fn pair_counts(pred: &Clustering, truth: &Clustering) -> Result<PairCounts> {
    check_universe(pred, truth)?;
    let mut cells: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pred_sizes: HashMap<u32, u64> = HashMap::new();
    let mut true_sizes: HashMap<u32, u64> = HashMap::new();
    for (&p, &t) in pred.assignment.iter().zip(&truth.assignment) {
        *cells.entry((p, t)).or_default() += 1;
        *pred_sizes.entry(p).or_default() += 1;
        *true_sizes.entry(t).or_default() += 1;
    }
    Ok(PairCounts {
        true_positive: cells.values().map(|&n| pairs(n)).sum(),
        predicted: pred_sizes.values().map(|&n| pairs(n)).sum(),
        actual: true_sizes.values().map(|&n| pairs(n)).sum(),
    })
}

/// Pairwise precision, recall and F of `pred` against `truth`.
pub fn pairwise_prf(pred: &Clustering, truth: &Clustering) -> Result<Prf> {
    let c = pair_counts(pred, truth)?;
    Prf::from_counts(c.true_positive as f64, c.predicted as f64, c.actual as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairComposition {
    pub matching_pairs: u64,
    pub non_matching_pairs: u64,
    /// `matching / non_matching`; absent when there are no non-matching pairs.
    pub ratio: Option<f64>,
}

pub fn pair_composition(truth: &Clustering) -> Result<PairComposition> {
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sizes: HashMap<u32, u64> = HashMap::new();
    truth.assignment.iter().for_each(|&t| *sizes.entry(t).or_default() += 1);
    let matching: u64 = sizes.values().map(|&n| pairs(n)).sum();
    let non_matching = pairs(truth.len() as u64) - matching;
    Ok(PairComposition {
        matching_pairs: matching,
        non_matching_pairs: non_matching,
        ratio: (non_matching > 0).then(|| matching as f64 / non_matching as f64),
    })
}

/// Per true cluster: how its members spread over predicted clusters.
/// Built once and reused across many cluster samples.
#[derive(Debug, Clone)]
pub struct ClusterProfile {
    /// True cluster id -> (predicted cluster, member count) cells.
    cells: BTreeMap<u32, Vec<(u32, u64)>>,
    pred_sizes: HashMap<u32, u64>,
}

/// Sums over one sampled true cluster used by the decomposed estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterTerms {
    /// Predicted-co-clustered pairs inside the cluster.
    pub true_positive: f64,
    /// `C(|c|, 2)`.
    pub true_pairs: f64,
    /// `TP(c)` plus half of every predicted link with exactly one endpoint in c.
    pub predicted_half: f64,
}

impl std::ops::AddAssign for ClusterTerms {
    fn add_assign(&mut self, o: Self) {
        self.true_positive += o.true_positive;
        self.true_pairs += o.true_pairs;
        self.predicted_half += o.predicted_half;
    }
}

impl ClusterProfile {
    pub fn new(pred: &Clustering, truth: &Clustering) -> Result<Self> {
        check_universe(pred, truth)?;
        let mut counts: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
        let mut pred_sizes: HashMap<u32, u64> = HashMap::new();
        for (&p, &t) in pred.assignment.iter().zip(&truth.assignment) {
            *counts.entry(t).or_default().entry(p).or_default() += 1;
            *pred_sizes.entry(p).or_default() += 1;
        }
        let cells = counts.into_iter().map(|(t, m)| (t, m.into_iter().collect())).collect();
        Ok(ClusterProfile { cells, pred_sizes })
    }

    /// True cluster ids in ascending order.
    pub fn cluster_ids(&self) -> Vec<u32> {
        self.cells.keys().copied().collect()
    }

    fn cells(&self, c: u32) -> Result<&[(u32, u64)]> {
        self.cells.get(&c).map(Vec::as_slice).ok_or(Error::UnknownCluster(c))
    }

    pub fn terms(&self, c: u32) -> Result<ClusterTerms> {
        let cells = self.cells(c)?;
        let size: u64 = cells.iter().map(|&(_, n)| n).sum();
        let tp: u64 = cells.iter().map(|&(_, n)| pairs(n)).sum();
        let crossing: u64 = cells.iter().map(|&(p, n)| n * (self.pred_sizes[&p] - n)).sum();
        Ok(ClusterTerms {
            true_positive: tp as f64,
            true_pairs: pairs(size) as f64,
            predicted_half: tp as f64 + 0.5 * crossing as f64,
        })
    }

    /// Pairwise PRF on the records of the sampled true clusters, with
    /// predicted links to unsampled records dropped.
    pub fn plugin(&self, sample: &[u32]) -> Result<Prf> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut restricted: HashMap<u32, u64> = HashMap::new();
        let (mut tp, mut actual) = (0u64, 0u64);
        for &c in sample {
            let cells = self.cells(c)?;
            actual += pairs(cells.iter().map(|&(_, n)| n).sum());
            for &(p, n) in cells {
                tp += pairs(n);
                *restricted.entry(p).or_default() += n;
            }
        }
        let predicted: u64 = restricted.values().map(|&n| pairs(n)).sum();
        Prf::from_counts(tp as f64, predicted as f64, actual as f64)
    }

    pub fn decomposed(&self, sample: &[u32]) -> Result<DecomposedEstimate> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sums = ClusterTerms::default();
        for &c in sample {
            sums += self.terms(c)?;
        }
        DecomposedEstimate::from_sums(sums)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposedEstimate {
    pub sums: ClusterTerms,
    pub prf: Prf,
}

impl DecomposedEstimate {
    fn from_sums(sums: ClusterTerms) -> Result<Self> {
        if sums.predicted_half <= 0.0 {
            return Err(Error::ZeroDenominator("precision"));
        }
        if sums.true_pairs <= 0.0 {
            return Err(Error::ZeroDenominator("recall"));
        }
        Ok(DecomposedEstimate {
            sums,
            prf: Prf {
                precision: sums.true_positive / sums.predicted_half,
                recall: sums.true_positive / sums.true_pairs,
                f_score: sums.true_positive / (0.5 * (sums.true_pairs + sums.predicted_half)),
            },
        })
    }
}

fn check_sample(sample: &[u32]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    if let Some(&dup) = sample.iter().find(|c| !seen.insert(**c)) {
        return Err(Error::InvalidArgument(format!("true cluster {dup} sampled twice")));
    }
    Ok(())
}

/// The plug-in estimate: pairwise F on the records of the sampled true
/// clusters only.
pub fn plugin_f_on_cluster_sample(pred: &Clustering, truth: &Clustering, sample: &[u32]) -> Result<Prf> {
    check_sample(sample)?;
    ClusterProfile::new(pred, truth)?.plugin(sample)
}

/// Ratio estimator built from per-true-cluster sums. Predicted links that
/// leave a cluster count half towards each of their two true clusters, so
/// summing over every cluster recovers the census pair counts exactly.
pub fn cluster_decomposed_f(pred: &Clustering, truth: &Clustering, sample: &[u32]) -> Result<DecomposedEstimate> {
    check_sample(sample)?;
    ClusterProfile::new(pred, truth)?.decomposed(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(v: &[u32]) -> Clustering {
        Clustering::new(v.to_vec())
    }

    fn brute_force(pred: &Clustering, truth: &Clustering) -> (u64, u64, u64) {
        let n = pred.len();
        let (mut tp, mut p, mut t) = (0, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let sp = pred.assignment[i] == pred.assignment[j];
                let st = truth.assignment[i] == truth.assignment[j];
                tp += u64::from(sp && st);
                p += u64::from(sp);
                t += u64::from(st);
            }
        }
        (tp, p, t)
    }

    #[test]
    fn identical_clusterings_are_perfect() {
        let t = c(&[0, 0, 1, 1, 1, 2]);
        let prf = pairwise_prf(&t, &t).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f_score), (1.0, 1.0, 1.0));
    }

    #[test]
    fn small_worked_example() {
        let truth = c(&[0, 0, 1, 1]);
        let pred = c(&[0, 0, 0, 1]);
        let prf = pairwise_prf(&pred, &truth).unwrap();
        assert!((prf.precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((prf.recall - 0.5).abs() < 1e-15);
        assert!((prf.f_score - 0.4).abs() < 1e-15);
    }

    #[test]
    fn empty_pair_sets_are_distinct_errors() {
        let singletons = c(&[0, 1, 2]);
        let merged = c(&[0, 0, 0]);
        assert!(matches!(pairwise_prf(&singletons, &merged), Err(Error::NoPredictedPairs)));
        assert!(matches!(pairwise_prf(&merged, &singletons), Err(Error::NoTruePairs)));
        assert!(matches!(pairwise_prf(&merged, &c(&[0, 0])), Err(Error::UniverseMismatch { .. })));
    }

    #[test]
    fn composition_of_balanced_clusters() {
        let forty: Vec<u32> = (0..400).map(|i| i / 10).collect();
        let comp = pair_composition(&Clustering::new(forty)).unwrap();
        assert_eq!((comp.matching_pairs, comp.non_matching_pairs), (1800, 78000));
        let ten: Vec<u32> = (0..100).map(|i| i / 10).collect();
        let comp = pair_composition(&Clustering::new(ten)).unwrap();
        assert_eq!((comp.matching_pairs, comp.non_matching_pairs), (450, 4500));
        assert_eq!(comp.ratio, Some(0.1));
        assert_eq!(pair_composition(&c(&[0, 1, 2])).unwrap().matching_pairs, 0);
        assert_eq!(pair_composition(&c(&[0, 0])).unwrap().ratio, None);
    }

    #[test]
    fn full_sample_plugin_equals_census() {
        let truth = c(&[0, 0, 1, 1, 2, 2, 2]);
        let pred = c(&[5, 5, 5, 1, 1, 2, 2]);
        let all = [0, 1, 2];
        assert_eq!(plugin_f_on_cluster_sample(&pred, &truth, &all).unwrap(), pairwise_prf(&pred, &truth).unwrap());
    }

    #[test]
    fn plugin_matches_restriction_by_hand() {
        // Four true clusters of two; the prediction merges clusters 0 and 1.
        let truth = c(&[0, 0, 1, 1, 2, 2, 3, 3]);
        let pred = c(&[0, 0, 0, 0, 1, 1, 2, 2]);
        let ids = [0u32, 1, 2, 3];
        // All subsets of size 1..=4 that contain at least one true pair.
        for mask in 1u32..16 {
            let sample: Vec<u32> = ids.iter().copied().filter(|&i| mask & (1 << i) != 0).collect();
            let keep: Vec<usize> = (0..8).filter(|&r| sample.contains(&truth.assignment[r])).collect();
            let sub_t = Clustering::new(keep.iter().map(|&r| truth.assignment[r]).collect());
            let sub_p = Clustering::new(keep.iter().map(|&r| pred.assignment[r]).collect());
            let (tp, p, t) = brute_force(&sub_p, &sub_t);
            let got = plugin_f_on_cluster_sample(&pred, &truth, &sample).unwrap();
            assert!((got.f_score - 2.0 * tp as f64 / (p + t) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposed_census_identity_on_toy() {
        let truth = c(&[0, 0, 1, 1, 2, 2, 2]);
        let pred = c(&[5, 5, 5, 1, 1, 2, 2]);
        let est = cluster_decomposed_f(&pred, &truth, &[0, 1, 2]).unwrap();
        let census = pairwise_prf(&pred, &truth).unwrap();
        assert_eq!(est.prf, census);
    }

    #[test]
    fn decomposed_sums_are_unbiased_over_all_pairs_of_clusters() {
        let truth = c(&[0, 0, 0, 1, 1, 2, 2, 3, 3, 3]);
        let pred = c(&[0, 0, 1, 1, 1, 2, 3, 3, 3, 4]);
        let profile = ClusterProfile::new(&pred, &truth).unwrap();
        let census = pair_counts(&pred, &truth).unwrap();
        let (m, big_m) = (2.0, 4.0);
        let mut mean = ClusterTerms::default();
        let mut draws = 0.0;
        for a in 0..4u32 {
            for b in a + 1..4 {
                mean += profile.decomposed(&[a, b]).unwrap().sums;
                draws += 1.0;
            }
        }
        let scale = big_m / m / draws;
        assert!((mean.true_positive * scale - census.true_positive as f64).abs() < 1e-12);
        assert!((mean.true_pairs * scale - census.actual as f64).abs() < 1e-12);
        assert!((mean.predicted_half * scale - census.predicted as f64).abs() < 1e-12);
    }

    #[test]
    fn duplicate_or_unknown_sample_ids_are_rejected() {
        let truth = c(&[0, 0, 1, 1]);
        assert!(plugin_f_on_cluster_sample(&truth, &truth, &[0, 0]).is_err());
        assert!(matches!(plugin_f_on_cluster_sample(&truth, &truth, &[7]), Err(Error::UnknownCluster(7))));
        assert!(matches!(cluster_decomposed_f(&truth, &truth, &[]), Err(Error::EmptySample)));
    }

    fn random_clustering(g: &mut impl Rng, n: usize, k: u32) -> Clustering {
        Clustering::new((0..n).map(|_| g.random_range(0..k)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn f_lies_between_precision_and_recall(seed: u64, n in 2usize..60, kp in 1u32..8, kt in 1u32..8) {
            let mut g = rng::stream(seed, "prf-bounds", 0);
            let pred = random_clustering(&mut g, n, kp);
            let truth = random_clustering(&mut g, n, kt);
            if let Ok(prf) = pairwise_prf(&pred, &truth) {
                prop_assert!(prf.f_score >= prf.precision.min(prf.recall) - 1e-15);
                prop_assert!(prf.f_score <= prf.precision.max(prf.recall) + 1e-15);
            }
        }
    }
}
