use serde::{Deserialize, Serialize};

use crate::data::{sample_without_replacement, TabularDataset};
use crate::error::{Error, Result};
use crate::learners::{fit_ols_qr, predict, tree_loo_predictions, LearnerSpec, Regressor, TreeParams};
use crate::rng;

/// `1 - h_ii` at or below this is treated as an interpolated point.
const LEVERAGE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum CvScheme {
    Loo,
    KFold { k: usize, seed: u64 },
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / y.len() as f64
}

/// Mean squared error over every row of a finite population.
pub fn true_generalization_error<M: Regressor + ?Sized>(model: &M, population: &TabularDataset) -> Result<f64> {
    if population.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(mse(&predict(model, population)?, population.targets()))
}

/// Cross-validated MSE by literal refitting: LOO trains on every
/// `n - 1`-row deletion, k-fold on shuffled contiguous folds whose sizes
/// differ by at most one.
pub fn cross_validate(learner: &LearnerSpec, ds: &TabularDataset, scheme: CvScheme) -> Result<f64> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cross-validation needs n >= 2, got {n}")));
    }
    match scheme {
        CvScheme::Loo => {
            let mut total = 0.0;
            for i in 0..n {
                let model = learner.fit(&ds.without_row(i))?;
                let e = model.predict_row(ds.row(i)) - ds.targets()[i];
                total += e * e;
            }
            Ok(total / n as f64)
        }
        CvScheme::KFold { k, seed } => {
            if k < 2 || k > n {
                return Err(Error::InvalidArgument(format!("k-fold needs 2 <= k <= n, got k = {k}, n = {n}")));
            }
            let rows: Vec<usize> = (0..n).collect();
            let shuffled = sample_without_replacement(&rows, n, &mut rng::stream(seed, "kfold", 0));
            let mut total = 0.0;
            let mut start = 0;
            for fold in 0..k {
                let size = n / k + usize::from(fold < n % k);
                let held: Vec<usize> = shuffled[start..start + size].to_vec();
                let train: Vec<usize> = shuffled[..start].iter().chain(&shuffled[start + size..]).copied().collect();
                start += size;
                let model = learner.fit(&ds.select(&train))?;
                let test = ds.select(&held);
                total += mse(&predict(model.as_ref(), &test)?, test.targets());
            }
            Ok(total / k as f64)
        }
    }
}

/// Exact OLS leave-one-out MSE, `mean((e_i / (1 - h_ii))^2)`.
pub fn loo_ols_exact(ds: &TabularDataset) -> Result<f64> {
    let fit = fit_ols_qr(ds)?;
    let mut total = 0.0;
    for i in 0..ds.len() {
        let x = ds.row(i);
        let h = fit.leverage(x);
        if 1.0 - h <= LEVERAGE_EPS {
            return Err(Error::DegenerateLeverage { row: i });
        }
        let e = (ds.targets()[i] - fit.model.predict_row(x)) / (1.0 - h);
        total += e * e;
    }
    Ok(total / ds.len() as f64)
}

/// Leave-one-out MSE through each learner's exact shortcut: the leverage
/// identity for OLS, incremental refits for trees, and the closed form
/// `(n / (n - 1))^2 * mean((y - ybar)^2)` for the mean predictor.
pub fn loo_shortcut(learner: &LearnerSpec, ds: &TabularDataset) -> Result<f64> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cross-validation needs n >= 2, got {n}")));
    }
    match *learner {
        LearnerSpec::Ols => loo_ols_exact(ds),
        LearnerSpec::Tree { max_depth, min_leaf } => {
            let pred = tree_loo_predictions(ds, TreeParams { max_depth, min_leaf })?;
            Ok(mse(&pred, ds.targets()))
        }
        LearnerSpec::Mean => {
            let y = ds.targets();
            let mean = y.iter().sum::<f64>() / n as f64;
            let scale = n as f64 / (n - 1) as f64;
            Ok(scale * scale * y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityReport {
    pub lower: f64,
    pub upper: f64,
    pub violations: usize,
    /// Population row ids whose prediction falls outside the bounds.
    pub row_ids: Vec<u64>,
    pub min_prediction: f64,
    pub max_prediction: f64,
}

pub fn prediction_plausibility_check<M: Regressor + ?Sized>(
    model: &M,
    population: &TabularDataset,
    lower: f64,
    upper: f64,
) -> Result<PlausibilityReport> {
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!("bounds [{lower}, {upper}] are empty")));
    }
    let pred = predict(model, population)?;
    let row_ids: Vec<u64> = pred
        .iter()
        .zip(population.ids())
        .filter(|(p, _)| **p < lower || **p > upper)
        .map(|(_, id)| *id)
        .collect();
    Ok(PlausibilityReport {
        lower,
        upper,
        violations: row_ids.len(),
        row_ids,
        min_prediction: pred.iter().copied().fold(f64::INFINITY, f64::min),
        max_prediction: pred.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
