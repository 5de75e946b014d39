use serde::{Deserialize, Serialize};

use super::Regressor;
use crate::data::TabularDataset;
use crate::error::{Error, Result};

/// A column of R with norm below this fraction of the original column norm
/// marks the design as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Regressor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Householder QR of the design matrix `[1 | X]`, kept for leverage queries.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub model: LinearModel,
    /// Upper-triangular R, row-major `p x p` with `p = d + 1`.
    r: Vec<f64>,
    p: usize,
}

impl OlsFit {
    /// Diagonal entry `h_ii` of the hat matrix for a design row `[1, x]`.
    pub fn leverage(&self, x: &[f64]) -> f64 {
        // Solve R^T z = a by forward substitution; h = |z|^2.
        let p = self.p;
        let mut z = vec![0.0; p];
        for i in 0..p {
            let a_i = if i == 0 { 1.0 } else { x[i - 1] };
            let s: f64 = (0..i).map(|k| self.r[k * p + i] * z[k]).sum();
            z[i] = (a_i - s) / self.r[i * p + i];
        }
        z.iter().map(|v| v * v).sum()
    }
}

pub fn fit_ols(ds: &TabularDataset) -> Result<LinearModel> {
    Ok(fit_ols_qr(ds)?.model)
}

/// Least squares by Householder QR on the intercept-augmented design.
pub fn fit_ols_qr(ds: &TabularDataset) -> Result<OlsFit> {
    let n = ds.len();
    let d = ds.n_features();
    let p = d + 1;
    if n <= d {
        return Err(Error::InvalidArgument(format!("OLS needs n > d (n = {n}, d = {d})")));
    }

    // Column-major copy of [1 | X].
    let mut a = vec![0.0; n * p];
    a[..n].fill(1.0);
    for i in 0..n {
        for (j, &v) in ds.row(i).iter().enumerate() {
            a[(j + 1) * n + i] = v;
        }
    }
    let mut qty = ds.targets().to_vec();
    let col_norms: Vec<f64> = (0..p)
        .map(|j| a[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let mut v = vec![0.0; n];
    for j in 0..p {
        let col = &a[j * n..(j + 1) * n];
        let norm = col[j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= RANK_TOLERANCE * col_norms[j] || norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        v[j..].copy_from_slice(&col[j..]);
        v[j] -= alpha;
        let vnorm2: f64 = v[j..].iter().map(|x| x * x).sum();

        a[j * n + j] = alpha;
        a[j * n + j + 1..(j + 1) * n].fill(0.0);
        for k in j + 1..p {
            let c = &mut a[k * n..(k + 1) * n];
            let s = 2.0 * v[j..].iter().zip(&c[j..]).map(|(x, y)| x * y).sum::<f64>() / vnorm2;
            c[j..].iter_mut().zip(&v[j..]).for_each(|(c, x)| *c -= s * x);
        }
        let s = 2.0 * v[j..].iter().zip(&qty[j..]).map(|(x, y)| x * y).sum::<f64>() / vnorm2;
        qty[j..].iter_mut().zip(&v[j..]).for_each(|(c, x)| *c -= s * x);
    }

    let mut r = vec![0.0; p * p];
    for i in 0..p {
        for k in i..p {
            r[i * p + k] = a[k * n + i];
        }
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| r[i * p + k] * beta[k]).sum();
        beta[i] = (qty[i] - s) / r[i * p + i];
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFiniteInput("fit_ols"));
    }
    Ok(OlsFit {
        model: LinearModel {
            intercept: beta[0],
            coefficients: beta[1..].to_vec(),
        },
        r,
        p,
    })
}
