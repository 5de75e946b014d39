//! End-to-end acceptance run. Prints one PASS/FAIL line per check, with
//! indented details, and a summary. Expected failures are reported, not hidden.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use estimands::estimators::pair_composition;
use estimands::learners::Clustering;
use estimands::runner::{self, Overrides, RunReport};

const SEED: u64 = 2024;
const CV_REPLICATIONS: usize = 50_000;
const ORACLE_CASES: u64 = 200;

struct Ledger {
    passed: usize,
    failed: Vec<String>,
}

impl Ledger {
    fn check(&mut self, id: &str, ok: bool, what: &str, detail: String) {
        println!("{} [{id}] {what}", if ok { "PASS" } else { "FAIL" });
        for line in detail.lines() {
            println!("      {line}");
        }
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(format!("[{id}] {what}"));
        }
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &str, replications: Option<usize>, threads: usize) -> RunReport {
    let overrides = Overrides {
        seed: Some(SEED),
        replications,
        output: None,
    };
    let prepared = runner::prepare(&configs().join(config), &overrides).expect("config prepares");
    runner::execute(&prepared, threads).expect("experiment runs")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn cv(l: &mut Ledger) {
    let t = Instant::now();
    let report = run("cv-rank-reversal.json", Some(CV_REPLICATIONS), 0);
    let cv = report.cv.as_ref().unwrap();
    let c = &cv.conditional;
    let u = &cv.unconditional;
    let elapsed = t.elapsed().as_secs_f64();
    let p = c.probability.unwrap_or(f64::NAN);
    l.check(
        "1a",
        c.replications >= 200 && (0.69..=0.82).contains(&p),
        "CV reversal probability (conditional target) in [0.69, 0.82]",
        format!(
            "p = {p:.4} over {} effective of {} replications (ties {}, failures {}), Wilson {:?}; {elapsed:.0} s",
            c.effective,
            c.replications,
            c.ties,
            c.failures,
            c.interval.as_ref().map(|i| (i.lo, i.hi))
        ),
    );
    let [tl, tt] = c.mean_true;
    l.check(
        "1b",
        within_rel(tl, 4.02, 0.05) && within_rel(tt, 0.553, 0.05),
        "mean true MSE within 5% of 4.02 (OLS) and 0.553 (tree)",
        format!("OLS {tl:.4}, tree {tt:.4}"),
    );
    let [el, et] = c.mean_estimate;
    l.check(
        "1c",
        within_rel(el, 4.00, 0.05) && within_rel(et, 0.553, 0.05),
        "mean LOO estimate within 5% of 4.00 (OLS) and 0.553 (tree)",
        format!("OLS {el:.4}, tree {et:.4}"),
    );
    let q = u.probability.unwrap_or(f64::NAN);
    l.check(
        "2",
        u.replications >= 200 && (0.59..=0.73).contains(&q),
        "CV reversal probability (unconditional target) in [0.59, 0.73]",
        format!("p = {q:.4} against mean true MSE [{:.4}, {:.4}]", u.mean_true[0], u.mean_true[1]),
    );
}

fn clustering(l: &mut Ledger) {
    let t = Instant::now();
    let report = run("clustering-rank-reversal.json", None, 0);
    let s = report.clustering.as_ref().unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let plugin = &s.results["plugin"];
    let dec = &s.results["cluster-decomposed"];
    let [fa, fb] = [s.true_prf[0].f_score, s.true_prf[1].f_score];
    let pp = plugin.probability.unwrap_or(f64::NAN);
    let pd = dec.probability.unwrap_or(f64::NAN);
    let header = format!(
        "source {}, {} records / {} identities, k = {:?}, {} samples of {} clusters, {elapsed:.0} s",
        s.source, s.records, s.identities, s.k, plugin.replications, s.clusters_per_sample
    );
    l.check(
        "3-design",
        plugin.replications == 20_000 && s.clusters_per_sample == 10 && s.k == [30, 60],
        "20,000 samples of 10 clusters, k = 30 vs 60",
        header,
    );
    if s.source.starts_with("embeddings") {
        l.check(
            "3a",
            within(fa, 0.87, 0.02) && within(fb, 0.73, 0.02),
            "true F within 0.02 of 0.87 (k=30) and 0.73 (k=60)",
            format!("{fa:.4} / {fb:.4}"),
        );
        let [ea, eb] = plugin.mean_estimate;
        l.check(
            "3b",
            within(ea, 0.87, 0.02) && within(eb, 0.90, 0.02),
            "mean plugin estimates within 0.02 of 0.87 / 0.90",
            format!("{ea:.4} / {eb:.4}"),
        );
        l.check("3c", within(pp, 0.66, 0.03), "plugin reversal probability within 0.03 of 0.66", format!("p = {pp:.4}"));
        return;
    }
    println!("NOTE [3] embedding asset absent; checking the synthetic substitute");
    l.check(
        "3a",
        fa > fb,
        "true ranking favours the under-split model (k=30)",
        format!("true F: k=30 {fa:.4}, k=60 {fb:.4}"),
    );
    l.check("3b", pp > 0.5, "plugin reversal probability > 0.5", format!("p = {pp:.4}"));
    let [da, db] = dec.mean_estimate;
    l.check(
        "3c",
        within(da, fa, 0.02) && within(db, fb, 0.02),
        "cluster-decomposed mean within 0.02 of true F for both models",
        format!("mean {da:.4} / {db:.4} vs true {fa:.4} / {fb:.4}"),
    );
    l.check(
        "3d",
        pd < pp,
        "cluster-decomposed reversal probability below the plugin's",
        format!("decomposed {pd:.4}, plugin {pp:.4}"),
    );
}

fn balanced(clusters: u32, size: u32) -> Clustering {
    Clustering::new((0..clusters).flat_map(|c| std::iter::repeat_n(c, size as usize)).collect())
}

fn composition(l: &mut Ledger) {
    let census = pair_composition(&balanced(40, 10)).unwrap();
    let sample = pair_composition(&balanced(10, 10)).unwrap();
    l.check(
        "4a",
        census.matching_pairs == 1_800 && census.non_matching_pairs == 78_000,
        "40x10 census has 1,800 matching / 78,000 non-matching pairs",
        format!("{} / {} (ratio {:.4})", census.matching_pairs, census.non_matching_pairs, census.ratio.unwrap()),
    );
    l.check(
        "4b",
        sample.matching_pairs == 450 && sample.non_matching_pairs == 4_500 && sample.ratio == Some(0.1),
        "10x10 sample has 450 / 4,500 pairs, ratio 0.1",
        format!("{} / {} (ratio {:?})", sample.matching_pairs, sample.non_matching_pairs, sample.ratio),
    );
}

fn strata(l: &mut Ledger) {
    let t = Instant::now();
    let report = run("benchmark-strata.json", None, 0);
    let s = report.strata.as_ref().unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    l.check(
        "5a",
        s.detection.reversal,
        "strata detector reports a reversal",
        format!("preferred per stratum {:?}; {elapsed:.1} s", s.detection.preferred),
    );
    let expected = [[("easy", 0.88), ("hard", 0.36)], [("easy", 0.80), ("hard", 0.45)]];
    let mut ok = s.items.values().all(|&n| n == 10_000);
    let mut detail = format!("items per stratum {:?}\n", s.items);
    for (m, rates) in expected.iter().enumerate() {
        for &(stratum, target) in rates {
            let got = s.rates[m][stratum];
            ok &= within(got, target, 0.02);
            detail.push_str(&format!("{} {stratum}: {got:.4} (target {target})\n", report.models[m]));
        }
    }
    l.check("5b", ok, "per-stratum rates within 0.02 of targets", detail);

    let oracle: Vec<f64> = s.rates.iter().map(|r| r.values().sum::<f64>() / r.len() as f64).collect();
    let [ma, mb] = s.equal_weight_means;
    let easy_a = s.rates[0]["easy"] > s.rates[1]["easy"];
    l.check(
        "5c",
        within(ma, oracle[0], 1e-12)
            && within(mb, oracle[1], 1e-12)
            && within(ma, 0.62, 0.02)
            && within(mb, 0.625, 0.02)
            && easy_a
            && ma < mb,
        "equal-weight means near 0.62 vs 0.625 reverse the easy-stratum ranking",
        format!("reported {ma:.4} / {mb:.4}, recomputed {:.4} / {:.4}", oracle[0], oracle[1]),
    );
}

fn oracles(l: &mut Ledger) {
    let t = Instant::now();
    for (name, check) in common::SUITES {
        let failures: Vec<String> = (0..ORACLE_CASES).filter_map(|s| check(SEED ^ s).err()).collect();
        let detail = failures.first().cloned().unwrap_or_default();
        l.check(
            "6",
            failures.is_empty(),
            &format!("{name}: {ORACLE_CASES} cases"),
            format!("{} failed {detail}", failures.len()),
        );
    }
    let secs = t.elapsed().as_secs_f64();
    l.check("6-time", secs <= 120.0, "oracle suites within 2 minutes", format!("{secs:.2} s"));
}

fn outputs(report: &RunReport) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for path in runner::write_outputs(report, dir.path()).unwrap() {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = std::fs::read(&path).unwrap();
        let bytes = if name == "report.json" {
            runner::comparable_json(&String::from_utf8(bytes).unwrap()).unwrap().into_bytes()
        } else {
            bytes
        };
        files.push((name, bytes));
    }
    files
}

fn determinism(l: &mut Ledger) {
    let runs = [
        ("cv-rank-reversal.json", Some(200)),
        ("clustering-rank-reversal.json", Some(2_000)),
        ("benchmark-strata.json", None),
        ("mcdm-aggregate.json", None),
    ];
    for (config, reps) in runs {
        let one = outputs(&run(config, reps, 1));
        let many = outputs(&run(config, reps, 4));
        let names: Vec<&str> = one.iter().map(|(n, _)| n.as_str()).collect();
        l.check(
            "7",
            one == many,
            &format!("{config}: outputs identical at 1 and 4 threads"),
            format!("compared {names:?} (report.json without timestamps)"),
        );
    }
}

fn main() {
    let mut l = Ledger {
        passed: 0,
        failed: Vec::new(),
    };
    composition(&mut l);
    strata(&mut l);
    oracles(&mut l);
    determinism(&mut l);
    clustering(&mut l);
    cv(&mut l);
    println!("\n{} passed, {} failed", l.passed, l.failed.len());
    for f in &l.failed {
        println!("  failed: {f}");
    }
}
