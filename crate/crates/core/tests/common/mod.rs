//! Independent oracles shared by the property suite and the acceptance run.
//! Each check draws one random instance from `seed` and compares the library
//! against a brute-force or dense-linear-algebra reference.

#![allow(dead_code)]

use estimands::estimators::{cluster_decomposed_f, cross_validate, loo_ols_exact, pairwise_prf, CvScheme};
use estimands::learners::{fit_ols, Clustering, LearnerSpec};
use estimands::mcdm::{ahp_weights, pareto_frontier, ComparisonMatrix, CriteriaMatrix, Criterion, Direction, RANDOM_INDEX};
use estimands::rng;
use estimands::data::TabularDataset;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Check = fn(u64) -> Result<(), String>;

pub const SUITES: [(&str, Check); 6] = [
    ("pairwise_prf vs brute-force pairs", check_pairwise_prf),
    ("cluster_decomposed_f census identity", check_census_identity),
    ("loo_ols_exact vs naive refits", check_loo_ols),
    ("pareto_frontier vs dominance oracle", check_pareto),
    ("ahp_weights vs dense eigensolver", check_ahp),
    ("fit_ols vs normal equations", check_ols_normal_equations),
];

fn gen(seed: u64, tag: &str) -> rng::StreamRng {
    rng::stream(seed, tag, 0)
}

fn labels(g: &mut impl Rng, n: usize, k: u32) -> Clustering {
    Clustering::new((0..n).map(|_| g.random_range(0..k)).collect())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn check_pairwise_prf(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-prf");
    let n = g.random_range(2..=60);
    let (kp, kt) = (g.random_range(1..=n as u32), g.random_range(1..=n as u32));
    let pred = labels(&mut g, n, kp);
    let truth = labels(&mut g, n, kt);
    let (mut both, mut in_pred, mut in_truth) = (0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let p = pred.assignment[i] == pred.assignment[j];
            let t = truth.assignment[i] == truth.assignment[j];
            in_pred += u64::from(p);
            in_truth += u64::from(t);
            both += u64::from(p && t);
        }
    }
    match pairwise_prf(&pred, &truth) {
        Err(_) if in_pred == 0 || in_truth == 0 => Ok(()),
        Err(e) => Err(format!("n={n}: unexpected error {e}")),
        Ok(_) if in_pred == 0 || in_truth == 0 => Err(format!("n={n}: expected an undefined score")),
        Ok(prf) => {
            let p = both as f64 / in_pred as f64;
            let r = both as f64 / in_truth as f64;
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            if close(prf.precision, p, 1e-12) && close(prf.recall, r, 1e-12) && close(prf.f_score, f, 1e-12) {
                Ok(())
            } else {
                Err(format!("n={n}: got {prf:?}, brute force ({p}, {r}, {f})"))
            }
        }
    }
}

pub fn check_census_identity(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-census");
    let n = g.random_range(2..=200);
    let top = (n as u32 / 2).max(1);
    let (kt, kp) = (g.random_range(1..=top), g.random_range(1..=top));
    let truth = labels(&mut g, n, kt);
    let pred = labels(&mut g, n, kp);
    let mut ids = truth.assignment.clone();
    ids.sort_unstable();
    ids.dedup();
    match (pairwise_prf(&pred, &truth), cluster_decomposed_f(&pred, &truth, &ids)) {
        (Err(_), Err(_)) => Ok(()),
        (Ok(census), Ok(dec)) => {
            let same = dec.prf.precision == census.precision
                && dec.prf.recall == census.recall
                && dec.prf.f_score == census.f_score;
            if same {
                Ok(())
            } else {
                Err(format!("n={n}: census {census:?}, decomposed {:?}", dec.prf))
            }
        }
        (a, b) => Err(format!("n={n}: census {a:?} vs decomposed {b:?}")),
    }
}

fn random_regression(g: &mut impl Rng, n: usize, d: usize) -> TabularDataset {
    let beta: Vec<f64> = (0..d).map(|_| g.sample(StandardNormal)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| g.sample(StandardNormal)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| 0.5 + r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + g.sample::<f64, _>(StandardNormal))
        .collect();
    TabularDataset::from_rows(&rows, y).unwrap()
}

pub fn check_loo_ols(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-loo");
    let d = g.random_range(1..=4);
    let n = g.random_range(d + 6..=40);
    let ds = random_regression(&mut g, n, d);
    let fast = loo_ols_exact(&ds).map_err(|e| e.to_string())?;
    let naive = cross_validate(&LearnerSpec::Ols, &ds, CvScheme::Loo).map_err(|e| e.to_string())?;
    if (fast - naive).abs() <= 1e-8 * naive.abs() {
        Ok(())
    } else {
        Err(format!("n={n}, d={d}: shortcut {fast}, naive {naive}"))
    }
}

fn dominance_oracle(scores: &[Vec<f64>], maximize: &[bool]) -> Vec<usize> {
    let better_or_equal = |a: &[f64], b: &[f64], j: usize| if maximize[j] { a[j] >= b[j] } else { a[j] <= b[j] };
    let strictly = |a: &[f64], b: &[f64], j: usize| if maximize[j] { a[j] > b[j] } else { a[j] < b[j] };
    (0..scores.len())
        .filter(|&i| {
            !(0..scores.len()).any(|o| {
                let k = maximize.len();
                o != i
                    && (0..k).all(|j| better_or_equal(&scores[o], &scores[i], j))
                    && (0..k).any(|j| strictly(&scores[o], &scores[i], j))
            })
        })
        .collect()
}

pub fn check_pareto(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-pareto");
    let n = g.random_range(1..=12);
    let k = g.random_range(1..=3);
    let maximize: Vec<bool> = (0..k).map(|_| g.random_bool(0.5)).collect();
    // A small integer grid makes ties and duplicate rows common.
    let scores: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| g.random_range(0..4) as f64).collect()).collect();
    let criteria = maximize
        .iter()
        .enumerate()
        .map(|(j, &m)| Criterion {
            name: format!("c{j}"),
            direction: if m { Direction::Maximize } else { Direction::Minimize },
        })
        .collect();
    let names: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
    let m = CriteriaMatrix::new(names.clone(), criteria, scores.clone()).map_err(|e| e.to_string())?;
    let expected: Vec<String> = dominance_oracle(&scores, &maximize).into_iter().map(|i| names[i].clone()).collect();
    let got = pareto_frontier(&m);
    if got == expected {
        Ok(())
    } else {
        Err(format!("scores {scores:?}: got {got:?}, oracle {expected:?}"))
    }
}

const SAATY: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];

pub fn check_ahp(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-ahp");
    let k = g.random_range(3..=8);
    let mut v = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let s = SAATY[g.random_range(0..SAATY.len())];
            let a = if g.random_bool(0.5) { s } else { 1.0 / s };
            v[i][j] = a;
            v[j][i] = 1.0 / a;
        }
    }
    let r = ahp_weights(&ComparisonMatrix::from_values(v.clone()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;

    let a = DMatrix::from_fn(k, k, |i, j| v[i][j]);
    let lambda = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = &a - DMatrix::identity(k, k) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smallest = (0..k)
        .min_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]))
        .unwrap();
    let mut w: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);

    let max_diff = r.weights.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ci = (lambda - k as f64) / (k - 1) as f64;
    let cr = ci / RANDOM_INDEX[k - 1];
    let lambda_ok = (r.lambda_max - lambda).abs() <= 1e-8 * lambda;
    let cr_ok = (r.consistency_ratio.unwrap() - cr).abs() <= 1e-8;
    if max_diff <= 1e-8 && lambda_ok && cr_ok && r.inconsistent == (cr > 0.1) {
        Ok(())
    } else {
        Err(format!(
            "k={k}: weight diff {max_diff:e}, lambda {} vs {lambda}, CR {:?} vs {cr}",
            r.lambda_max, r.consistency_ratio
        ))
    }
}

pub fn check_ols_normal_equations(seed: u64) -> Result<(), String> {
    let mut g = gen(seed, "oracle-ols");
    let d = g.random_range(1..=5);
    let n = g.random_range(d + 5..=60);
    let ds = random_regression(&mut g, n, d);
    let model = fit_ols(&ds).map_err(|e| e.to_string())?;

    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { ds.row(i)[j - 1] });
    let y = DVector::from_column_slice(ds.targets());
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let beta = xtx.cholesky().ok_or("X^T X not positive definite")?.solve(&xty);

    let mut got = vec![model.intercept];
    got.extend(&model.coefficients);
    let worst = got
        .iter()
        .zip(beta.iter())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    if worst <= 1e-8 {
        Ok(())
    } else {
        Err(format!("n={n}, d={d}: max relative coefficient error {worst:e}"))
    }
}
