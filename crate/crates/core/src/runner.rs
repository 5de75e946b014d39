//! Config-driven experiment runner and report rendering.
//!
//! A run has three phases: [`prepare`] parses and checks the configuration
//! and loads its inputs, [`execute`] computes a [`RunReport`], and
//! [`write_outputs`] writes `report.json`, `table.csv` and, where the
//! experiment has them, `replications.csv` and `histograms.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    feature_histograms, generate_item_responses, load_california, load_embeddings_csv, load_item_responses_csv,
    EmbeddingDataset, HistogramBin, IdentityGenerator, ItemResponseMatrix, ItemResponseSpec, TabularDataset,
};
use crate::error::{Error, Result};
use crate::estimand::{validate_estimand, Estimand};
use crate::estimators::{estimate_item_difficulty, metadata_strata, pairwise_prf, stratified_success_rates, CvScheme, Prf};
use crate::learners::{assign_clusters, fit_kmeans, Clustering, KMeansParams, LearnerSpec};
use crate::mcdm::{
    ahp_weights, pareto_frontier, read_comparison_csv, read_criteria_csv, weighted_aggregate, AhpResult,
    ComparisonMatrix, CriteriaMatrix,
};
use crate::rank_reversal::{
    detect_strata_reversal, resampling_records, retarget, run_labeling_experiment, summarize, training_sample,
    write_replications_csv, ClusterEstimator, LabelingDesign, RankReversalResult, ResamplingDesign, ScoreDirection,
    StrataReversal, Target,
};
use crate::uncertainty::{sensitivity_range, Interval, SensitivityRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CvRankReversal,
    ClusteringRankReversal,
    BenchmarkStrata,
    McdmAggregate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CvRankReversal => "cv-rank-reversal",
            ExperimentKind::ClusteringRankReversal => "clustering-rank-reversal",
            ExperimentKind::BenchmarkStrata => "benchmark-strata",
            ExperimentKind::McdmAggregate => "mcdm-aggregate",
        }
    }

    fn section(self) -> &'static str {
        match self {
            ExperimentKind::CvRankReversal => "cv",
            ExperimentKind::ClusteringRankReversal => "clustering",
            ExperimentKind::BenchmarkStrata => "benchmark",
            ExperimentKind::McdmAggregate => "mcdm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub estimand: Estimand,
    pub seed: u64,
    /// Monte Carlo replications (CV) or simulations (clustering).
    #[serde(default)]
    pub replications: Option<usize>,
    /// Relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cv: Option<CvConfig>,
    #[serde(default)]
    pub clustering: Option<ClusteringConfig>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkConfig>,
    #[serde(default)]
    pub mcdm: Option<McdmConfig>,
}

/// Paths inside kind sections are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    /// California Housing CSV.
    pub dataset: PathBuf,
    pub learners: [LearnerSpec; 2],
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub scheme: CvScheme,
}

fn default_scheme() -> CvScheme {
    CvScheme::Loo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Embedding CSV; the synthetic generator is used when absent or missing.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_generator")]
    pub generator: IdentityGenerator,
    /// k of models A and B.
    pub k: [usize; 2],
    #[serde(default = "default_kmeans_seed")]
    pub kmeans_seed: u64,
    pub clusters_per_sample: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<ClusterEstimator>,
}

fn default_generator() -> IdentityGenerator {
    IdentityGenerator::DEFAULT
}

fn default_kmeans_seed() -> u64 {
    2024
}

fn default_estimators() -> Vec<ClusterEstimator> {
    vec![ClusterEstimator::Plugin, ClusterEstimator::ClusterDecomposed]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrataSource {
    /// Item metadata labels.
    Metadata,
    /// Tertiles of mean success over reference models.
    Difficulty { reference_models: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Item-response CSV; generated from `generator` when absent.
    #[serde(default)]
    pub responses: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<ItemResponseSpec>,
    /// Defaults to the first two models of the matrix.
    #[serde(default)]
    pub models: Option<[String; 2]>,
    #[serde(default = "default_strata")]
    pub strata: StrataSource,
    /// Strata entering the reversal check; all of them by default, and
    /// easy and hard for difficulty tertiles.
    #[serde(default)]
    pub compare: Option<Vec<String>>,
}

fn default_strata() -> StrataSource {
    StrataSource::Metadata
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Inline(T),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McdmConfig {
    pub criteria: Source<CriteriaMatrix>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub comparison: Option<Source<ComparisonMatrix>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub replications: usize,
    /// Wall-clock times; the only field that differs between identical runs.
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub estimand: Estimand,
    pub main_estimate: f64,
    pub uncertainty: Option<Interval>,
    pub sensitivity: Option<SensitivityRange>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub n: usize,
    pub scheme: CvScheme,
    pub conditional: RankReversalResult,
    pub unconditional: RankReversalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub source: String,
    pub records: usize,
    pub identities: usize,
    pub k: [usize; 2],
    pub clusters_per_sample: usize,
    pub true_prf: [Prf; 2],
    /// The first configured estimator; its records go to `replications.csv`.
    pub primary: String,
    pub results: BTreeMap<String, RankReversalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataSummary {
    pub items: BTreeMap<String, usize>,
    pub rates: [BTreeMap<String, f64>; 2],
    pub compared: Vec<String>,
    pub detection: StrataReversal,
    /// Unweighted mean of the compared strata's rates.
    pub equal_weight_means: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McdmSummary {
    pub criteria: CriteriaMatrix,
    pub frontier: Vec<String>,
    pub weights: Vec<f64>,
    pub weight_source: String,
    pub aggregate: BTreeMap<String, f64>,
    pub ahp: Option<AhpResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub models: [String; 2],
    pub evaluation: EvaluationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<StrataSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcdm: Option<McdmSummary>,
    /// Training set of the first replication, for feature histograms.
    #[serde(skip)]
    pub histograms: Option<Vec<HistogramBin>>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub output: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
            if let Some(a) = self.estimand.acquisition.as_mut() {
                a.seed = seed;
            }
        }
        if o.replications.is_some() {
            self.replications = o.replications;
        }
        if o.output.is_some() {
            self.output = o.output.clone();
        }
    }

    fn replications(&self) -> usize {
        self.replications.unwrap_or(0)
    }

    /// Every problem with the configuration: estimand issues verbatim,
    /// missing kind sections, and missing input files.
    pub fn issues(&self, base: &Path) -> Vec<String> {
        let mut out: Vec<String> = validate_estimand(&self.estimand).iter().map(ToString::to_string).collect();
        let missing_file = |p: &Path, out: &mut Vec<String>| {
            let full = base.join(p);
            if !full.is_file() {
                out.push(format!("dataset missing: {}", full.display()));
            }
        };
        let section_present = match self.kind {
            ExperimentKind::CvRankReversal => self.cv.is_some(),
            ExperimentKind::ClusteringRankReversal => self.clustering.is_some(),
            ExperimentKind::BenchmarkStrata => self.benchmark.is_some(),
            ExperimentKind::McdmAggregate => self.mcdm.is_some(),
        };
        if !section_present {
            out.push(format!("kind {} requires a \"{}\" section", self.kind.name(), self.kind.section()));
        }
        let needs_replications = matches!(self.kind, ExperimentKind::CvRankReversal | ExperimentKind::ClusteringRankReversal);
        if needs_replications && self.replications() == 0 {
            out.push("replications must be at least 1".into());
        }
        match self.kind {
            ExperimentKind::CvRankReversal => {
                if let Some(cv) = &self.cv {
                    missing_file(&cv.dataset, &mut out);
                    if cv.n < 2 {
                        out.push("cv.n must be at least 2".into());
                    }
                }
            }
            ExperimentKind::ClusteringRankReversal => {
                if let Some(c) = &self.clustering {
                    if c.estimators.is_empty() {
                        out.push("clustering.estimators is empty".into());
                    }
                    if c.clusters_per_sample == 0 {
                        out.push("clustering.clusters_per_sample must be at least 1".into());
                    }
                }
            }
            ExperimentKind::BenchmarkStrata => {
                if let Some(b) = &self.benchmark {
                    match &b.responses {
                        Some(p) => missing_file(p, &mut out),
                        None if b.generator.is_none() => out.push("benchmark needs responses or a generator".into()),
                        None => {}
                    }
                }
            }
            ExperimentKind::McdmAggregate => {
                if let Some(m) = &self.mcdm {
                    if let Source::Csv(p) = &m.criteria {
                        missing_file(p, &mut out);
                    }
                    if let Some(Source::Csv(p)) = &m.comparison {
                        missing_file(p, &mut out);
                    }
                }
            }
        }
        out
    }
}

enum Inputs {
    Cv(TabularDataset),
    Clustering { source: String, data: EmbeddingDataset },
    Benchmark(ItemResponseMatrix),
    Mcdm { criteria: CriteriaMatrix, comparison: Option<ComparisonMatrix> },
}

/// A checked configuration with its inputs loaded.
pub struct Prepared {
    pub config: ExperimentConfig,
    inputs: Inputs,
}

/// Parses, checks and loads. Every error here is a configuration error.
pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<Prepared> {
    let mut config = load_config(config_path)?;
    config.apply(overrides);
    let base = config_path.parent().unwrap_or(Path::new("")).to_path_buf();
    prepare_config(config, &base)
}

pub fn prepare_config(config: ExperimentConfig, base: &Path) -> Result<Prepared> {
    let issues = config.issues(base);
    if !issues.is_empty() {
        return Err(Error::InvalidEstimand(issues));
    }
    let inputs = match config.kind {
        ExperimentKind::CvRankReversal => Inputs::Cv(load_california(base.join(&config.cv.as_ref().unwrap().dataset))?),
        ExperimentKind::ClusteringRankReversal => {
            let c = config.clustering.as_ref().unwrap();
            match c.embeddings.as_ref().map(|p| base.join(p)).filter(|p| p.is_file()) {
                Some(path) => Inputs::Clustering {
                    data: load_embeddings_csv(&path)?,
                    source: format!("embeddings:{}", path.file_name().unwrap_or_default().to_string_lossy()),
                },
                None => Inputs::Clustering {
                    data: c.generator.generate()?,
                    source: "synthetic".into(),
                },
            }
        }
        ExperimentKind::BenchmarkStrata => {
            let b = config.benchmark.as_ref().unwrap();
            Inputs::Benchmark(match (&b.responses, &b.generator) {
                (Some(p), _) => load_item_responses_csv(base.join(p))?,
                (None, Some(spec)) => generate_item_responses(spec, config.seed)?,
                (None, None) => unreachable!("checked by issues"),
            })
        }
        ExperimentKind::McdmAggregate => {
            let m = config.mcdm.as_ref().unwrap();
            let criteria = match &m.criteria {
                Source::Inline(c) => c.clone(),
                Source::Csv(p) => read_criteria_csv(open(&base.join(p))?)?,
            };
            let comparison = match &m.comparison {
                None => None,
                Some(Source::Inline(c)) => Some(c.clone()),
                Some(Source::Csv(p)) => Some(read_comparison_csv(open(&base.join(p))?)?),
            };
            Inputs::Mcdm { criteria, comparison }
        }
    };
    Ok(Prepared { config, inputs })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn probability_of(r: &RankReversalResult) -> f64 {
    r.probability.unwrap_or(f64::NAN)
}

/// Runs the experiment. `threads = 0` uses every core; the report does not
/// depend on the thread count.
pub fn execute(prepared: &Prepared, threads: usize) -> Result<RunReport> {
    let started = now();
    let config = &prepared.config;
    let seed = config.seed;
    let mut report = match &prepared.inputs {
        Inputs::Cv(population) => run_cv(config, population, threads)?,
        Inputs::Clustering { source, data } => run_clustering(config, source, data, threads)?,
        Inputs::Benchmark(irm) => run_benchmark(config, irm)?,
        Inputs::Mcdm { criteria, comparison } => run_mcdm(config, criteria, comparison.as_ref())?,
    };
    report.evaluation.provenance = Provenance {
        master_seed: seed,
        replications: config.replications(),
        timestamps: Some(Timestamps {
            started,
            finished: now(),
        }),
    };
    Ok(report)
}

fn skeleton(config: &ExperimentConfig, models: [String; 2], main_estimate: f64) -> RunReport {
    RunReport {
        kind: config.kind,
        models,
        evaluation: EvaluationReport {
            estimand: config.estimand.clone(),
            main_estimate,
            uncertainty: None,
            sensitivity: None,
            provenance: Provenance {
                master_seed: config.seed,
                replications: config.replications(),
                timestamps: None,
            },
        },
        cv: None,
        clustering: None,
        strata: None,
        mcdm: None,
        histograms: None,
    }
}

fn run_cv(config: &ExperimentConfig, population: &TabularDataset, threads: usize) -> Result<RunReport> {
    let cv = config.cv.as_ref().unwrap();
    let design = ResamplingDesign {
        learners: cv.learners,
        n: cv.n,
        replications: config.replications(),
        scheme: cv.scheme,
        master_seed: config.seed,
    };
    let records = resampling_records(population, &design, threads)?;
    let conditional = summarize(retarget(&records, Target::Conditional), ScoreDirection::LowerIsBetter)?;
    let unconditional = summarize(retarget(&records, Target::Unconditional), ScoreDirection::LowerIsBetter)?;
    let mut report = skeleton(config, [cv.learners[0].name(), cv.learners[1].name()], probability_of(&conditional));
    report.evaluation.uncertainty = conditional.interval.clone();
    report.evaluation.sensitivity = Some(sensitivity_range(&[
        ("conditional target".into(), probability_of(&conditional)),
        ("unconditional target".into(), probability_of(&unconditional)),
    ])?);
    report.histograms = Some(emit_plot_data(&training_sample(population, cv.n, config.seed, 0), population)?);
    report.cv = Some(CvSummary {
        n: cv.n,
        scheme: cv.scheme,
        conditional,
        unconditional,
    });
    Ok(report)
}

fn estimator_name(e: ClusterEstimator) -> &'static str {
    match e {
        ClusterEstimator::Plugin => "plugin",
        ClusterEstimator::ClusterDecomposed => "cluster-decomposed",
    }
}

fn run_clustering(config: &ExperimentConfig, source: &str, data: &EmbeddingDataset, threads: usize) -> Result<RunReport> {
    let c = config.clustering.as_ref().unwrap();
    let truth = Clustering::new(data.identity().to_vec());
    let mut preds = Vec::with_capacity(2);
    for k in c.k {
        let model = fit_kmeans(data.vectors(), data.dim(), KMeansParams::new(k, c.kmeans_seed))?;
        preds.push(assign_clusters(&model, data)?);
    }
    let true_prf = [pairwise_prf(&preds[0], &truth)?, pairwise_prf(&preds[1], &truth)?];
    let mut results = BTreeMap::new();
    let mut first = None;
    for &estimator in &c.estimators {
        let design = LabelingDesign {
            clusters_per_sample: c.clusters_per_sample,
            simulations: config.replications(),
            estimator,
            master_seed: config.seed,
        };
        let r = run_labeling_experiment([&preds[0], &preds[1]], &truth, &design, threads)?;
        first.get_or_insert(estimator_name(estimator));
        results.insert(estimator_name(estimator).to_string(), r);
    }
    let primary = &results[first.unwrap()];
    let mut report = skeleton(config, c.k.map(|k| format!("k-means-{k}")), probability_of(primary));
    report.evaluation.uncertainty = primary.interval.clone();
    let labelled: Vec<(String, f64)> = results.iter().map(|(k, r)| (k.clone(), probability_of(r))).collect();
    report.evaluation.sensitivity = Some(sensitivity_range(&labelled)?);
    report.clustering = Some(ClusteringSummary {
        source: source.to_string(),
        records: data.len(),
        identities: data.n_identities(),
        k: c.k,
        clusters_per_sample: c.clusters_per_sample,
        true_prf,
        primary: first.unwrap().to_string(),
        results,
    });
    Ok(report)
}

fn run_benchmark(config: &ExperimentConfig, irm: &ItemResponseMatrix) -> Result<RunReport> {
    let b = config.benchmark.as_ref().unwrap();
    let models = match &b.models {
        Some(m) => m.clone(),
        None => match irm.models() {
            [a, b, ..] => [a.clone(), b.clone()],
            _ => return Err(Error::InvalidArgument("benchmark needs at least two models".into())),
        },
    };
    let (labels, default_compare) = match &b.strata {
        StrataSource::Metadata => (metadata_strata(irm)?, None),
        StrataSource::Difficulty { reference_models } => (
            estimate_item_difficulty(irm, reference_models)?.labels(),
            Some(vec!["easy".to_string(), "hard".to_string()]),
        ),
    };
    let rates = [
        stratified_success_rates(irm, &labels, &models[0])?,
        stratified_success_rates(irm, &labels, &models[1])?,
    ];
    let compared: Vec<String> = b
        .compare
        .clone()
        .or(default_compare)
        .unwrap_or_else(|| rates[0].keys().cloned().collect());
    let pick = |r: &BTreeMap<String, f64>| -> Result<BTreeMap<String, f64>> {
        compared
            .iter()
            .map(|s| r.get(s).map(|&v| (s.clone(), v)).ok_or(Error::StrataMismatch))
            .collect()
    };
    let (a, bb) = (pick(&rates[0])?, pick(&rates[1])?);
    let detection = detect_strata_reversal(&a, &bb)?;
    let mean = |m: &BTreeMap<String, f64>| m.values().sum::<f64>() / m.len() as f64;
    let mut items = BTreeMap::new();
    for l in &labels {
        *items.entry(l.clone()).or_insert(0) += 1;
    }
    let mut report = skeleton(config, models, if detection.reversal { 1.0 } else { 0.0 });
    report.strata = Some(StrataSummary {
        items,
        equal_weight_means: [mean(&a), mean(&bb)],
        rates,
        compared,
        detection,
    });
    Ok(report)
}

fn run_mcdm(config: &ExperimentConfig, criteria: &CriteriaMatrix, comparison: Option<&ComparisonMatrix>) -> Result<RunReport> {
    let m = config.mcdm.as_ref().unwrap();
    let ahp = comparison.map(ahp_weights).transpose()?;
    let k = criteria.criteria().len();
    let (weights, weight_source) = match (&m.weights, &ahp) {
        (Some(w), _) => (w.clone(), "config"),
        (None, Some(a)) => (a.weights.clone(), "ahp"),
        (None, None) => (vec![1.0 / k as f64; k], "uniform"),
    };
    let aggregate = weighted_aggregate(criteria, &weights)?;
    let best = aggregate.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let alts = criteria.alternatives();
    let models = [alts[0].clone(), alts.get(1).cloned().unwrap_or_default()];
    let mut report = skeleton(config, models, best);
    report.mcdm = Some(McdmSummary {
        criteria: criteria.clone(),
        frontier: pareto_frontier(criteria),
        weights,
        weight_source: weight_source.into(),
        aggregate,
        ahp,
    });
    Ok(report)
}

/// Fixed-width feature histograms of a sample against its population.
pub fn emit_plot_data(sample: &TabularDataset, population: &TabularDataset) -> Result<Vec<HistogramBin>> {
    feature_histograms(sample, population)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn csv_line(out: &mut String, cells: &[String]) {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(cells).expect("in-memory write");
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8"));
}

/// The summary table of a report as CSV: one row per metric with a column
/// per model, plus reversal-probability rows.
pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    let [a, b] = &report.models;
    let row = |out: &mut String, label: &str, x: f64, y: Option<f64>| {
        csv_line(out, &[label.to_string(), num(x), y.map(num).unwrap_or_default()]);
    };
    if let Some(m) = &report.mcdm {
        csv_line(&mut out, &["alternative".into(), "weighted score".into(), "pareto".into()]);
        for alt in m.criteria.alternatives() {
            let on = m.frontier.contains(alt);
            csv_line(&mut out, &[alt.clone(), num(m.aggregate[alt]), u8::from(on).to_string()]);
        }
        return out;
    }
    csv_line(&mut out, &["metric".into(), a.clone(), b.clone()]);
    if let Some(cv) = &report.cv {
        let c = &cv.conditional;
        row(&mut out, "avg true MSE", c.mean_true[0], Some(c.mean_true[1]));
        row(&mut out, "avg CV estimate", c.mean_estimate[0], Some(c.mean_estimate[1]));
        row(&mut out, "reversal probability", probability_of(c), None);
        row(&mut out, "reversal probability (unconditional target)", probability_of(&cv.unconditional), None);
    }
    if let Some(cl) = &report.clustering {
        row(&mut out, "True F-score", cl.true_prf[0].f_score, Some(cl.true_prf[1].f_score));
        let ordered: Vec<(&String, &RankReversalResult)> = cl
            .results
            .get_key_value(&cl.primary)
            .into_iter()
            .chain(cl.results.iter().filter(|(name, _)| **name != cl.primary))
            .collect();
        for (i, (name, r)) in ordered.iter().enumerate() {
            let label = if i == 0 { "Avg. of F-score estimates".to_string() } else { format!("Avg. of F-score estimates ({name})") };
            row(&mut out, &label, r.mean_estimate[0], Some(r.mean_estimate[1]));
        }
        for (i, (name, r)) in ordered.iter().enumerate() {
            let label = if i == 0 { "reversal probability".to_string() } else { format!("reversal probability ({name})") };
            row(&mut out, &label, probability_of(r), None);
        }
    }
    if let Some(s) = &report.strata {
        for stratum in s.rates[0].keys() {
            let label = if s.compared.contains(stratum) {
                stratum.clone()
            } else {
                format!("{stratum} (not compared)")
            };
            row(&mut out, &label, s.rates[0][stratum], s.rates[1].get(stratum).copied());
        }
        row(&mut out, "overall (equal-weight mean)", s.equal_weight_means[0], Some(s.equal_weight_means[1]));
        row(&mut out, "reversal probability", report.evaluation.main_estimate, None);
    }
    out
}

pub fn render_histograms(bins: &[HistogramBin]) -> String {
    let mut out = String::new();
    csv_line(
        &mut out,
        &["feature", "bin", "lo", "hi", "sample_count", "population_count"].map(String::from),
    );
    for h in bins {
        csv_line(
            &mut out,
            &[
                h.feature.clone(),
                h.bin.to_string(),
                num(h.lo),
                num(h.hi),
                h.sample_count.to_string(),
                h.population_count.to_string(),
            ],
        );
    }
    out
}

pub fn report_json(report: &RunReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// `report.json` with the timestamps removed, for determinism checks.
pub fn comparable_json(text: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(text)?;
    if let Some(p) = v.pointer_mut("/evaluation/provenance") {
        p["timestamps"] = serde_json::Value::Null;
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every artifact into `dir`, returning the paths written.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put("report.json", report_json(report)?)?;
    put("table.csv", render_table(report))?;
    let replications = match (&report.cv, &report.clustering) {
        (Some(cv), _) => vec![("replications.csv".to_string(), &cv.conditional)],
        (_, Some(cl)) => cl
            .results
            .iter()
            .map(|(name, r)| {
                let file = if *name == cl.primary { "replications.csv".to_string() } else { format!("replications-{name}.csv") };
                (file, r)
            })
            .collect(),
        _ => vec![],
    };
    for (file, r) in replications {
        let mut buf = Vec::new();
        write_replications_csv(&r.records, &mut buf)?;
        put(&file, String::from_utf8(buf).expect("csv is utf8"))?;
    }
    if let Some(h) = &report.histograms {
        put("histograms.csv", render_histograms(h))?;
    }
    Ok(written)
}

/// Reads a `report.json` written by [`write_outputs`].
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_item_responses_csv;
    use crate::estimand::california_cv_estimand;

    fn benchmark_config() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::BenchmarkStrata,
            estimand: california_cv_estimand(10, 1),
            seed: 3,
            replications: None,
            output: None,
            cv: None,
            clustering: None,
            benchmark: Some(BenchmarkConfig {
                responses: None,
                generator: Some(ItemResponseSpec::format_following(2000)),
                models: None,
                strata: StrataSource::Metadata,
                compare: None,
            }),
            mcdm: None,
        }
    }

    #[test]
    fn benchmark_run_flags_reversal() {
        let p = prepare_config(benchmark_config(), Path::new(".")).unwrap();
        let r = execute(&p, 1).unwrap();
        let s = r.strata.as_ref().unwrap();
        assert!(s.detection.reversal);
        assert_eq!(r.evaluation.main_estimate, 1.0);
        let table = render_table(&r);
        assert!(table.starts_with("metric,llama-2-7b,mistral-7b-instruct-v0.1\n"));
        assert!(table.contains("\nreversal probability,1,\n"));
        assert_eq!(table, render_table(&r));
    }

    #[test]
    fn missing_sections_and_metric_are_issues() {
        let mut c = benchmark_config();
        c.benchmark = None;
        c.estimand.metric = None;
        let issues = c.issues(Path::new("."));
        assert!(issues.iter().any(|i| i.contains("component C")));
        assert!(issues.iter().any(|i| i.contains("\"benchmark\"")));
        assert!(matches!(prepare_config(c, Path::new(".")), Err(Error::InvalidEstimand(_))));
    }

    #[test]
    fn missing_dataset_is_an_issue() {
        let mut c = benchmark_config();
        c.benchmark.as_mut().unwrap().responses = Some("no-such-file.csv".into());
        assert!(c.issues(Path::new(".")).iter().any(|i| i.starts_with("dataset missing")));
    }

    #[test]
    fn report_round_trips_and_strips_timestamps() {
        let p = prepare_config(benchmark_config(), Path::new(".")).unwrap();
        let r = execute(&p, 1).unwrap();
        let text = report_json(&r).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(render_table(&back), render_table(&r));
        let again = execute(&p, 2).unwrap();
        assert_eq!(comparable_json(&text).unwrap(), comparable_json(&report_json(&again).unwrap()).unwrap());
        assert!(text.contains("\"estimand\""));
    }

    #[test]
    fn outputs_are_written_from_csv_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let irm = generate_item_responses(&ItemResponseSpec::format_following(300), 5).unwrap();
        let f = fs::File::create(dir.path().join("responses.csv")).unwrap();
        write_item_responses_csv(&irm, f).unwrap();
        let mut c = benchmark_config();
        c.benchmark.as_mut().unwrap().responses = Some("responses.csv".into());
        let r = execute(&prepare_config(c, dir.path()).unwrap(), 1).unwrap();
        let written = write_outputs(&r, &dir.path().join("out")).unwrap();
        let names: Vec<_> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, vec!["report.json", "table.csv"]);
        let back = read_report(&written[0]).unwrap();
        assert_eq!(back.strata, r.strata);
    }

    #[test]
    fn config_json_parses() {
        let text = r#"{
            "kind": "mcdm-aggregate",
            "seed": 1,
            "mcdm": {
                "criteria": {
                    "alternatives": ["x", "y"],
                    "criteria": [{"name": "acc", "direction": "maximize"}, {"name": "cost", "direction": "minimize"}],
                    "scores": [[0.9, 2.0], [0.8, 1.0]]
                },
                "comparison": {"labels": ["acc", "cost"], "values": [[1, 3], [0.3333333333333333, 1]]}
            }
        }"#;
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        let Err(p) = prepare_config(c, Path::new(".")) else {
            panic!("estimand without population accepted")
        };
        assert!(matches!(p, Error::InvalidEstimand(ref v) if v.iter().any(|i| i.contains("component A"))));
        let mut c: ExperimentConfig = serde_json::from_str(text).unwrap();
        c.estimand = california_cv_estimand(10, 1);
        let r = execute(&prepare_config(c, Path::new(".")).unwrap(), 1).unwrap();
        let m = r.mcdm.unwrap();
        assert_eq!(m.weight_source, "ahp");
        assert_eq!(m.frontier, vec!["x", "y"]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"kind":"cv-rank-reversal","seed":1,"bogus":2}"#).is_err());
    }
}
