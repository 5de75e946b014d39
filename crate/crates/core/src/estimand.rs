//! The estimand data model: what an evaluation is trying to estimate.
//!
//! An estimand has four components, lettered
//! A = scope/population, B = data acquisition, C = metric, D = aggregation,
//! plus a free-text narrative that is carried but never interpreted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric identifiers accepted by [`validate_estimand`].
pub const REGISTERED_METRICS: &[&str] = &[
    "squared-error",
    "pair-match",
    "binary-success",
    "criteria-scores",
];

/// Aggregation identifiers accepted by [`validate_estimand`].
pub const REGISTERED_AGGREGATIONS: &[&str] = &[
    "mean",
    "pairwise-f-score",
    "cluster-f-score",
    "stratified-mean",
    "weighted-average",
    "pareto-frontier",
    "ahp-weighted-average",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    /// Scope or population.
    A,
    /// Data acquisition and handling.
    B,
    /// Metric.
    C,
    /// Aggregation.
    D,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Component::A => "A (scope/population)",
            Component::B => "B (acquisition)",
            Component::C => "C (metric)",
            Component::D => "D (aggregation)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationKind {
    FiniteDataset,
    ResamplingProcess,
    ClusterPopulation,
    ItemPopulation,
}

impl PopulationKind {
    fn as_str(self) -> &'static str {
        match self {
            PopulationKind::FiniteDataset => "finite-dataset",
            PopulationKind::ResamplingProcess => "resampling-process",
            PopulationKind::ClusterPopulation => "cluster-population",
            PopulationKind::ItemPopulation => "item-population",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            PopulationKind::FiniteDataset,
            PopulationKind::ResamplingProcess,
            PopulationKind::ClusterPopulation,
            PopulationKind::ItemPopulation,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub name: String,
    pub members: Vec<String>,
}

/// Component A.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub kind: PopulationKind,
    /// Dataset or generator identifier.
    pub reference: String,
    #[serde(default)]
    pub description: String,
    /// Number of sampling units (records, clusters or items), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<Stratum>>,
}

impl PopulationSpec {
    /// Checks that the strata partition `universe`: disjoint and exhaustive.
    pub fn strata_partition(&self, universe: &[String]) -> bool {
        let Some(strata) = &self.strata else {
            return true;
        };
        let mut seen = BTreeSet::new();
        for member in strata.iter().flat_map(|s| &s.members) {
            if !seen.insert(member.as_str()) {
                return false;
            }
        }
        let all: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
        seen == all
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AcquisitionScheme {
    WithReplacementSample { n: usize },
    SimpleRandomClusterSample { m: usize },
    StratifiedSample { allocation: BTreeMap<String, usize> },
    FullCensus,
}

impl AcquisitionScheme {
    fn name(&self) -> &'static str {
        match self {
            AcquisitionScheme::WithReplacementSample { .. } => "with-replacement-sample",
            AcquisitionScheme::SimpleRandomClusterSample { .. } => "simple-random-cluster-sample",
            AcquisitionScheme::StratifiedSample { .. } => "stratified-sample",
            AcquisitionScheme::FullCensus => "full-census",
        }
    }
}

/// Component B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionPolicy {
    pub scheme: AcquisitionScheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub caveats: Vec<String>,
}

/// Component C.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricId {
    pub id: String,
    #[serde(default)]
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Estimand {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition: Option<AcquisitionPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricId>,
    /// Component D, an identifier from [`REGISTERED_AGGREGATIONS`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
    #[serde(default)]
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub component: Component,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "component {}: {}", self.component, self.message)
    }
}

fn issue(component: Component, message: impl Into<String>) -> Issue {
    Issue {
        component,
        message: message.into(),
    }
}

/// Lists completeness and registration problems, in component order.
///
/// An empty list means all four components are present, registered, and
/// internally consistent.
pub fn validate_estimand(e: &Estimand) -> Vec<Issue> {
    let mut issues = Vec::new();

    match &e.population {
        None => issues.push(issue(Component::A, "scope/population is missing")),
        Some(p) => {
            if p.reference.trim().is_empty() {
                issues.push(issue(Component::A, "population reference is empty"));
            }
            if let Some(strata) = &p.strata {
                let mut seen = BTreeSet::new();
                let overlapping = strata
                    .iter()
                    .flat_map(|s| &s.members)
                    .any(|m| !seen.insert(m.as_str()));
                if overlapping {
                    issues.push(issue(Component::A, "strata are not disjoint"));
                }
                if let Some(size) = p.size {
                    if seen.len() != size {
                        issues.push(issue(
                            Component::A,
                            format!("strata cover {} units, population has {size}", seen.len()),
                        ));
                    }
                }
            }
        }
    }

    match &e.acquisition {
        None => issues.push(issue(Component::B, "data acquisition policy is missing")),
        Some(a) => {
            if let Some(msg) = acquisition_problem(a, e.population.as_ref()) {
                issues.push(issue(Component::B, msg));
            }
        }
    }

    match &e.metric {
        None => issues.push(issue(Component::C, "metric is missing")),
        Some(m) if !REGISTERED_METRICS.contains(&m.id.as_str()) => {
            issues.push(issue(Component::C, format!("metric {:?} is not registered", m.id)))
        }
        Some(_) => {}
    }

    match &e.aggregation {
        None => issues.push(issue(Component::D, "aggregation is missing")),
        Some(id) if !REGISTERED_AGGREGATIONS.contains(&id.as_str()) => issues.push(issue(
            Component::D,
            format!("aggregation {id:?} is not registered"),
        )),
        Some(_) => {}
    }

    issues
}

// At most one problem per policy, so adding a population can trade a
// "missing A" issue for at most one cross-check issue.
fn acquisition_problem(a: &AcquisitionPolicy, population: Option<&PopulationSpec>) -> Option<String> {
    let size = population.and_then(|p| p.size);
    match &a.scheme {
        AcquisitionScheme::WithReplacementSample { n } if *n == 0 => {
            Some("with-replacement sample size must be positive".into())
        }
        AcquisitionScheme::SimpleRandomClusterSample { m } => {
            if *m == 0 {
                Some("cluster sample size must be positive".into())
            } else if size.is_some_and(|s| *m > s) {
                Some(format!("cluster sample size {m} exceeds population size {}", size.unwrap()))
            } else {
                None
            }
        }
        AcquisitionScheme::StratifiedSample { allocation } => {
            if allocation.is_empty() || allocation.values().any(|&c| c == 0) {
                return Some("stratified allocation counts must be positive".into());
            }
            let strata = population.and_then(|p| p.strata.as_ref())?;
            for (name, &count) in allocation {
                match strata.iter().find(|s| &s.name == name) {
                    None => return Some(format!("allocation names unknown stratum {name:?}")),
                    Some(s) if count > s.members.len() => {
                        return Some(format!(
                            "allocation {count} exceeds stratum {name:?} of size {}",
                            s.members.len()
                        ))
                    }
                    Some(_) => {}
                }
            }
            None
        }
        _ => None,
    }
}

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(value: &str) -> Result<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "bad escape sequence \\{}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Renders a validated estimand as a line-oriented `key: value` block.
///
/// The rendering lists components A to D in order, with acquisition caveats
/// and metric units; [`parse_description`] inverts it.
pub fn describe_estimand(e: &Estimand) -> Result<String> {
    let issues = validate_estimand(e);
    if !issues.is_empty() {
        return Err(Error::InvalidEstimand(issues.iter().map(Issue::to_string).collect()));
    }
    // Validation guarantees every component is present.
    let p = e.population.as_ref().expect("validated");
    let a = e.acquisition.as_ref().expect("validated");
    let m = e.metric.as_ref().expect("validated");
    let d = e.aggregation.as_ref().expect("validated");

    let mut lines = vec!["estimand".to_string()];
    let mut push = |key: &str, value: &str| lines.push(format!("{key}: {}", escape(value)));
    push("A.population.kind", p.kind.as_str());
    push("A.population.reference", &p.reference);
    push("A.population.description", &p.description);
    if let Some(size) = p.size {
        push("A.population.size", &size.to_string());
    }
    for stratum in p.strata.iter().flatten() {
        push(
            "A.population.stratum",
            &serde_json::to_string(stratum).expect("stratum serializes"),
        );
    }
    push("B.acquisition.scheme", a.scheme.name());
    match &a.scheme {
        AcquisitionScheme::WithReplacementSample { n } => push("B.acquisition.n", &n.to_string()),
        AcquisitionScheme::SimpleRandomClusterSample { m } => {
            push("B.acquisition.m", &m.to_string())
        }
        AcquisitionScheme::StratifiedSample { allocation } => push(
            "B.acquisition.allocation",
            &serde_json::to_string(allocation).expect("allocation serializes"),
        ),
        AcquisitionScheme::FullCensus => {}
    }
    push("B.acquisition.seed", &a.seed.to_string());
    for caveat in &a.caveats {
        push("B.acquisition.caveat", caveat);
    }
    push("C.metric.id", &m.id);
    push("C.metric.units", &m.units);
    push("D.aggregation.id", d);
    push("narrative", &e.narrative);

    let mut text = lines.join("\n");
    text.push('\n');
    Ok(text)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

/// Parses the output of [`describe_estimand`] back into an estimand.
pub fn parse_description(text: &str) -> Result<Estimand> {
    let mut lines = text.lines();
    if lines.next() != Some("estimand") {
        return Err(Error::InvalidArgument("missing `estimand` header".into()));
    }

    let mut kind = None;
    let mut reference = String::new();
    let mut description = String::new();
    let mut size = None;
    let mut strata: Vec<Stratum> = Vec::new();
    let mut scheme_name = None;
    let mut n = None;
    let mut m = None;
    let mut allocation = None;
    let mut seed = 0u64;
    let mut caveats = Vec::new();
    let mut metric_id = None;
    let mut units = String::new();
    let mut aggregation = None;
    let mut narrative = String::new();

    for line in lines {
        let (key, raw) = line
            .split_once(": ")
            .or_else(|| line.strip_suffix(':').map(|k| (k, "")))
            .ok_or_else(|| Error::InvalidArgument(format!("malformed line {line:?}")))?;
        let value = unescape(raw)?;
        match key {
            "A.population.kind" => {
                kind = Some(PopulationKind::parse(&value).ok_or_else(|| {
                    Error::InvalidArgument(format!("unknown population kind {value:?}"))
                })?)
            }
            "A.population.reference" => reference = value,
            "A.population.description" => description = value,
            "A.population.size" => size = Some(parse_num(key, &value)?),
            "A.population.stratum" => strata.push(serde_json::from_str(&value)?),
            "B.acquisition.scheme" => scheme_name = Some(value),
            "B.acquisition.n" => n = Some(parse_num(key, &value)?),
            "B.acquisition.m" => m = Some(parse_num(key, &value)?),
            "B.acquisition.allocation" => allocation = Some(serde_json::from_str(&value)?),
            "B.acquisition.seed" => seed = parse_num(key, &value)?,
            "B.acquisition.caveat" => caveats.push(value),
            "C.metric.id" => metric_id = Some(value),
            "C.metric.units" => units = value,
            "D.aggregation.id" => aggregation = Some(value),
            "narrative" => narrative = value,
            other => return Err(Error::InvalidArgument(format!("unknown key {other:?}"))),
        }
    }

    let missing = |what: &str| Error::InvalidArgument(format!("description lacks {what}"));
    let scheme = match scheme_name.as_deref() {
        Some("with-replacement-sample") => AcquisitionScheme::WithReplacementSample {
            n: n.ok_or_else(|| missing("B.acquisition.n"))?,
        },
        Some("simple-random-cluster-sample") => AcquisitionScheme::SimpleRandomClusterSample {
            m: m.ok_or_else(|| missing("B.acquisition.m"))?,
        },
        Some("stratified-sample") => AcquisitionScheme::StratifiedSample {
            allocation: allocation.ok_or_else(|| missing("B.acquisition.allocation"))?,
        },
        Some("full-census") => AcquisitionScheme::FullCensus,
        _ => return Err(missing("a known B.acquisition.scheme")),
    };

    Ok(Estimand {
        population: Some(PopulationSpec {
            kind: kind.ok_or_else(|| missing("A.population.kind"))?,
            reference,
            description,
            size,
            strata: (!strata.is_empty()).then_some(strata),
        }),
        acquisition: Some(AcquisitionPolicy {
            scheme,
            seed,
            caveats,
        }),
        metric: Some(MetricId {
            id: metric_id.ok_or_else(|| missing("C.metric.id"))?,
            units,
        }),
        aggregation: Some(aggregation.ok_or_else(|| missing("D.aggregation.id"))?),
        narrative,
    })
}

/// The estimand of the regression cross-validation study: conditional
/// generalization MSE over every California Census block group.
pub fn california_cv_estimand(train_size: usize, seed: u64) -> Estimand {
    Estimand {
        population: Some(PopulationSpec {
            kind: PopulationKind::FiniteDataset,
            reference: "california-housing".into(),
            description: "all California Census block groups".into(),
            size: Some(20_640),
            strata: None,
        }),
        acquisition: Some(AcquisitionPolicy {
            scheme: AcquisitionScheme::WithReplacementSample { n: train_size },
            seed,
            caveats: vec![
                "training rows drawn with replacement; duplicates kept for leave-one-out".into(),
            ],
        }),
        metric: Some(MetricId {
            id: "squared-error".into(),
            units: "($100,000)^2".into(),
        }),
        aggregation: Some("mean".into()),
        narrative: "Which training algorithm yields the lower generalization error over the \
                    state's block groups?"
            .into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn components(issues: &[Issue]) -> Vec<Component> {
        issues.iter().map(|i| i.component).collect()
    }

    #[test]
    fn complete_estimand_has_no_issues() {
        assert!(validate_estimand(&california_cv_estimand(2000, 1)).is_empty());
    }

    #[test]
    fn missing_aggregation_is_component_d() {
        let mut e = california_cv_estimand(2000, 1);
        e.aggregation = None;
        assert_eq!(components(&validate_estimand(&e)), vec![Component::D]);
    }

    #[test]
    fn missing_acquisition_is_component_b() {
        let mut e = california_cv_estimand(2000, 1);
        e.acquisition = None;
        assert_eq!(components(&validate_estimand(&e)), vec![Component::B]);
    }

    #[test]
    fn unregistered_metric_is_component_c() {
        let mut e = california_cv_estimand(2000, 1);
        e.metric.as_mut().unwrap().id = "vibes".into();
        assert_eq!(components(&validate_estimand(&e)), vec![Component::C]);
    }

    #[test]
    fn zero_sample_size_is_flagged() {
        let mut e = california_cv_estimand(0, 1);
        assert_eq!(components(&validate_estimand(&e)), vec![Component::B]);
        e.acquisition.as_mut().unwrap().scheme = AcquisitionScheme::SimpleRandomClusterSample { m: 20_641 };
        assert_eq!(components(&validate_estimand(&e)), vec![Component::B]);
    }

    #[test]
    fn overlapping_strata_are_flagged() {
        let mut e = california_cv_estimand(10, 1);
        let p = e.population.as_mut().unwrap();
        p.size = Some(3);
        p.strata = Some(vec![
            Stratum { name: "x".into(), members: vec!["1".into(), "2".into()] },
            Stratum { name: "y".into(), members: vec!["2".into(), "3".into()] },
        ]);
        assert!(components(&validate_estimand(&e)).contains(&Component::A));
        assert!(!p_ok(&e));
    }

    fn p_ok(e: &Estimand) -> bool {
        let universe: Vec<String> = ["1", "2", "3"].iter().map(|s| s.to_string()).collect();
        e.population.as_ref().unwrap().strata_partition(&universe)
    }

    #[test]
    fn description_names_population() {
        let text = describe_estimand(&california_cv_estimand(2000, 9)).unwrap();
        assert!(text.contains("all California Census block groups"));
        assert!(text.contains("A.population"));
        assert!(text.contains("D.aggregation.id: mean"));
    }

    #[test]
    fn describe_rejects_invalid() {
        let mut e = california_cv_estimand(2000, 1);
        e.metric = None;
        assert!(matches!(describe_estimand(&e), Err(Error::InvalidEstimand(_))));
    }

    #[test]
    fn description_round_trips() {
        let mut e = california_cv_estimand(2000, 9);
        e.narrative = "multi\nline \\ narrative: with colon".into();
        e.acquisition.as_mut().unwrap().scheme = AcquisitionScheme::StratifiedSample {
            allocation: [("north".to_string(), 2usize), ("south".to_string(), 1)].into(),
        };
        e.population.as_mut().unwrap().strata = Some(vec![
            Stratum { name: "north".into(), members: vec!["a".into(), "b".into()] },
            Stratum { name: "south".into(), members: vec!["c".into()] },
        ]);
        e.population.as_mut().unwrap().size = Some(3);
        let text = describe_estimand(&e).unwrap();
        let parsed = parse_description(&text).unwrap();
        assert_eq!(parsed, e);
        assert_eq!(describe_estimand(&parsed).unwrap(), text);
    }

    #[test]
    fn json_uses_component_keys() {
        let v = serde_json::to_value(california_cv_estimand(2000, 3)).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["population", "acquisition", "metric", "aggregation", "narrative"] {
            assert!(keys.contains(&k), "missing {k}");
        }
    }
}
