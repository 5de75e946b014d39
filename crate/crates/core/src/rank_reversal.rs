//! Monte Carlo rank-reversal probabilities for pairs of models.
//!
//! A replication produces a true score and an estimate for each of two
//! models. It is a reversal when the estimates prefer a different model than
//! the true scores do. Replications where either pair is tied are counted
//! separately and left out of the probability, as are failed replications.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{indices_with_replacement, sample_without_replacement, TabularDataset};
use crate::error::{Error, Result};
use crate::estimators::{cross_validate, loo_shortcut, pairwise_prf, true_generalization_error, ClusterProfile, CvScheme};
use crate::learners::{Clustering, LearnerSpec};
use crate::rng;
use crate::uncertainty::{binomial_interval, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreDirection {
    /// Losses: the smaller value wins.
    LowerIsBetter,
    HigherIsBetter,
}

impl ScoreDirection {
    /// Index of the preferred model, `None` on a tie.
    pub fn preferred(self, a: f64, b: f64) -> Option<usize> {
        let (better, worse) = match self {
            ScoreDirection::LowerIsBetter => (a < b, a > b),
            ScoreDirection::HigherIsBetter => (a > b, a < b),
        };
        match (better, worse) {
            (true, _) => Some(0),
            (_, true) => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    /// True scores of models A and B.
    pub phi: [f64; 2],
    pub estimate: [f64; 2],
    /// Set only when all four values are finite and neither pair is tied.
    pub reversal: Option<bool>,
    pub tie: bool,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    pub fn new(replication: u64, phi: [f64; 2], estimate: [f64; 2], direction: ScoreDirection) -> Self {
        let mut record = ReplicationRecord {
            replication,
            phi,
            estimate,
            reversal: None,
            tie: false,
            failure: None,
        };
        if phi.iter().chain(&estimate).any(|v| !v.is_finite()) {
            record.failure = Some("non-finite score".into());
            return record;
        }
        match (direction.preferred(phi[0], phi[1]), direction.preferred(estimate[0], estimate[1])) {
            (Some(t), Some(e)) => record.reversal = Some(t != e),
            _ => record.tie = true,
        }
        record
    }

    pub fn failed(replication: u64, reason: impl Into<String>) -> Self {
        ReplicationRecord {
            replication,
            phi: [f64::NAN; 2],
            estimate: [f64::NAN; 2],
            reversal: None,
            tie: false,
            failure: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReversalResult {
    pub direction: ScoreDirection,
    /// `reversals / effective`; absent when no record is effective.
    pub probability: Option<f64>,
    pub replications: usize,
    /// Records that are neither failed nor tied.
    pub effective: usize,
    pub reversals: usize,
    pub ties: usize,
    pub failures: usize,
    /// Means over non-failed records.
    pub mean_true: [f64; 2],
    pub mean_estimate: [f64; 2],
    /// Wilson 95% interval for the probability.
    pub interval: Option<Interval>,
    /// Written to CSV rather than JSON.
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
}

/// Aggregates records already sorted by replication index.
pub fn summarize(records: Vec<ReplicationRecord>, direction: ScoreDirection) -> Result<RankReversalResult> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut reversals = 0;
    let mut ties = 0;
    let mut failures = 0;
    let mut sums = [0.0; 4];
    for r in &records {
        if r.failure.is_some() {
            failures += 1;
            continue;
        }
        for (s, v) in sums.iter_mut().zip(r.phi.iter().chain(&r.estimate)) {
            *s += v;
        }
        if r.tie {
            ties += 1;
        } else if r.reversal == Some(true) {
            reversals += 1;
        }
    }
    let ok = (records.len() - failures) as f64;
    let mean = |s: f64| if ok > 0.0 { s / ok } else { f64::NAN };
    let effective = records.len() - failures - ties;
    let (probability, interval) = if effective > 0 {
        (
            Some(reversals as f64 / effective as f64),
            Some(binomial_interval(reversals as u64, effective as u64, 0.95)?),
        )
    } else {
        (None, None)
    };
    Ok(RankReversalResult {
        direction,
        probability,
        replications: records.len(),
        effective,
        reversals,
        ties,
        failures,
        mean_true: [mean(sums[0]), mean(sums[1])],
        mean_estimate: [mean(sums[2]), mean(sums[3])],
        interval,
        records,
    })
}

/// Reversal probability over `(est_A, est_B, phi_A, phi_B)` tuples.
pub fn rank_reversal_probability(values: &[(f64, f64, f64, f64)], direction: ScoreDirection) -> Result<RankReversalResult> {
    let records = values
        .iter()
        .enumerate()
        .map(|(i, &(ea, eb, pa, pb))| ReplicationRecord::new(i as u64, [pa, pb], [ea, eb], direction))
        .collect();
    summarize(records, direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Error of the model trained on each replication's own sample.
    Conditional,
    /// Expected error over training sets, estimated by the run's mean.
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplingDesign {
    pub learners: [LearnerSpec; 2],
    pub n: usize,
    pub replications: usize,
    pub scheme: CvScheme,
    pub master_seed: u64,
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// True MSE and CV estimate for one learner on one training sample.
fn score(learner: &LearnerSpec, train: &TabularDataset, population: &TabularDataset, scheme: CvScheme) -> Result<(f64, f64)> {
    let model = learner.fit(train)?;
    let phi = true_generalization_error(model.as_ref(), population)?;
    let estimate = match scheme {
        CvScheme::Loo => loo_shortcut(learner, train)?,
        k_fold => cross_validate(learner, train, k_fold)?,
    };
    Ok((phi, estimate))
}

/// The with-replacement training set of replication `r`.
pub fn training_sample(population: &TabularDataset, n: usize, master_seed: u64, r: u64) -> TabularDataset {
    let mut g = rng::stream(master_seed, "resample", r);
    population.select(&indices_with_replacement(population.len(), n, &mut g))
}

fn replicate(population: &TabularDataset, design: &ResamplingDesign, r: u64) -> ReplicationRecord {
    let train = training_sample(population, design.n, design.master_seed, r);
    let scheme = match design.scheme {
        CvScheme::KFold { k, seed } => CvScheme::KFold {
            k,
            seed: rng::stream(seed, "kfold-replication", r).random(),
        },
        loo => loo,
    };
    let mut phi = [0.0; 2];
    let mut estimate = [0.0; 2];
    for (m, learner) in design.learners.iter().enumerate() {
        match score(learner, &train, population, scheme) {
            Ok((p, e)) => {
                phi[m] = p;
                estimate[m] = e;
            }
            Err(e) => return ReplicationRecord::failed(r, format!("{}: {e}", learner.name())),
        }
    }
    ReplicationRecord::new(r, phi, estimate, ScoreDirection::LowerIsBetter)
}

/// Per-replication records with conditional (own-sample) true scores.
/// `threads = 0` uses every core; the records do not depend on it.
pub fn resampling_records(population: &TabularDataset, design: &ResamplingDesign, threads: usize) -> Result<Vec<ReplicationRecord>> {
    if population.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if design.n < 2 || design.replications == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 and at least one replication (n = {}, replications = {})",
            design.n, design.replications
        )));
    }
    Ok(thread_pool(threads)?.install(|| {
        (0..design.replications as u64)
            .into_par_iter()
            .map(|r| replicate(population, design, r))
            .collect()
    }))
}

/// Re-targets conditional records: for the unconditional target every
/// record's true scores become the run mean over non-failed records.
pub fn retarget(records: &[ReplicationRecord], target: Target) -> Vec<ReplicationRecord> {
    match target {
        Target::Conditional => records.to_vec(),
        Target::Unconditional => {
            let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
            let mean = |m: usize| ok.iter().map(|r| r.phi[m]).sum::<f64>() / ok.len() as f64;
            let phi = [mean(0), mean(1)];
            records
                .iter()
                .map(|r| match r.failure {
                    Some(_) => r.clone(),
                    None => ReplicationRecord::new(r.replication, phi, r.estimate, ScoreDirection::LowerIsBetter),
                })
                .collect()
        }
    }
}

/// Trains both learners on with-replacement samples of the population and
/// compares their cross-validated MSE with the target MSE.
pub fn run_resampling_experiment(
    population: &TabularDataset,
    design: &ResamplingDesign,
    target: Target,
    threads: usize,
) -> Result<RankReversalResult> {
    let records = resampling_records(population, design, threads)?;
    summarize(retarget(&records, target), ScoreDirection::LowerIsBetter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterEstimator {
    Plugin,
    ClusterDecomposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingDesign {
    pub clusters_per_sample: usize,
    pub simulations: usize,
    pub estimator: ClusterEstimator,
    pub master_seed: u64,
}

/// Fixed predictions, random labelled subsets: each simulation samples true
/// clusters without replacement and estimates both models' pairwise F.
pub fn run_labeling_experiment(
    pred: [&Clustering; 2],
    truth: &Clustering,
    design: &LabelingDesign,
    threads: usize,
) -> Result<RankReversalResult> {
    let phi = [pairwise_prf(pred[0], truth)?.f_score, pairwise_prf(pred[1], truth)?.f_score];
    let profiles = [ClusterProfile::new(pred[0], truth)?, ClusterProfile::new(pred[1], truth)?];
    let ids = profiles[0].cluster_ids();
    let m = design.clusters_per_sample;
    if m == 0 || m > ids.len() {
        return Err(Error::InvalidArgument(format!("cannot sample {m} of {} true clusters", ids.len())));
    }
    if design.simulations == 0 {
        return Err(Error::InvalidArgument("need at least one simulation".into()));
    }
    let estimate = |p: &ClusterProfile, sample: &[u32]| -> Result<f64> {
        Ok(match design.estimator {
            ClusterEstimator::Plugin => p.plugin(sample)?.f_score,
            ClusterEstimator::ClusterDecomposed => p.decomposed(sample)?.prf.f_score,
        })
    };
    let records = thread_pool(threads)?.install(|| {
        (0..design.simulations as u64)
            .into_par_iter()
            .map(|s| {
                let sample = sample_without_replacement(&ids, m, &mut rng::stream(design.master_seed, "cluster-sample", s));
                match (estimate(&profiles[0], &sample), estimate(&profiles[1], &sample)) {
                    (Ok(a), Ok(b)) => ReplicationRecord::new(s, phi, [a, b], ScoreDirection::HigherIsBetter),
                    (Err(e), _) | (_, Err(e)) => ReplicationRecord::failed(s, e.to_string()),
                }
            })
            .collect()
    });
    summarize(records, ScoreDirection::HigherIsBetter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataReversal {
    pub reversal: bool,
    pub preferred: BTreeMap<String, Preference>,
}

/// Whether two models swap places between strata (higher rate is better).
pub fn detect_strata_reversal(rates_a: &BTreeMap<String, f64>, rates_b: &BTreeMap<String, f64>) -> Result<StrataReversal> {
    if rates_a.is_empty() || rates_b.is_empty() {
        return Err(Error::EmptyStrata);
    }
    if !rates_a.keys().eq(rates_b.keys()) {
        return Err(Error::StrataMismatch);
    }
    let preferred: BTreeMap<String, Preference> = rates_a
        .iter()
        .zip(rates_b.values())
        .map(|((k, &a), &b)| {
            let p = match ScoreDirection::HigherIsBetter.preferred(a, b) {
                Some(0) => Preference::A,
                Some(_) => Preference::B,
                None => Preference::Tie,
            };
            (k.clone(), p)
        })
        .collect();
    let has = |p| preferred.values().any(|&q| q == p);
    Ok(StrataReversal {
        reversal: has(Preference::A) && has(Preference::B),
        preferred,
    })
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// One row per record: replication, phi_A, phi_B, est_A, est_B, reversal,
/// failure. `reversal` is 1, 0, `tie`, or empty for failures.
pub fn write_replications_csv<W: Write>(records: &[ReplicationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["replication", "phi_A", "phi_B", "est_A", "est_B", "reversal", "failure"])?;
    for r in records {
        let reversal = match (r.reversal, r.tie) {
            (Some(true), _) => "1",
            (Some(false), _) => "0",
            (None, true) => "tie",
            (None, false) => "",
        };
        w.write_record([
            r.replication.to_string(),
            cell(r.phi[0]),
            cell(r.phi[1]),
            cell(r.estimate[0]),
            cell(r.estimate[1]),
            reversal.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("replications.csv", e))?;
    Ok(())
}
