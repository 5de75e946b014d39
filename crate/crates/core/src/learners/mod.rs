//! Learners: least squares, regression trees, and k-means clustering.

mod kmeans;
mod ols;
mod tree;

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

pub use kmeans::{assign_clusters, fit_kmeans, KMeansModel, KMeansParams};
pub use ols::{fit_ols, fit_ols_qr, LinearModel, OlsFit};
pub use tree::{fit_tree, tree_loo_predictions, RegressionTree, TreeNode, TreeParams};

pub trait Regressor {
    fn n_features(&self) -> usize;
    fn predict_row(&self, x: &[f64]) -> f64;
}

pub fn predict<M: Regressor + ?Sized>(model: &M, ds: &TabularDataset) -> Result<Vec<f64>> {
    if model.n_features() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: ds.n_features(),
        });
    }
    Ok((0..ds.len()).map(|i| model.predict_row(ds.row(i))).collect())
}

/// A regression learner named in experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ols,
    Tree { max_depth: usize, min_leaf: usize },
    /// Predicts the training mean everywhere.
    Mean,
}

impl LearnerSpec {
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Ols => "ols".into(),
            LearnerSpec::Tree { max_depth, .. } => format!("tree-depth-{max_depth}"),
            LearnerSpec::Mean => "mean".into(),
        }
    }

    pub fn fit(&self, ds: &TabularDataset) -> Result<Box<dyn Regressor + Send + Sync>> {
        Ok(match *self {
            LearnerSpec::Ols => Box::new(fit_ols(ds)?),
            LearnerSpec::Tree { max_depth, min_leaf } => Box::new(fit_tree(ds, TreeParams { max_depth, min_leaf })?),
            LearnerSpec::Mean => Box::new(ConstantModel::fit(ds)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub value: f64,
    pub n_features: usize,
}

impl ConstantModel {
    pub fn fit(ds: &TabularDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(ConstantModel {
            value: ds.targets().iter().sum::<f64>() / ds.len() as f64,
            n_features: ds.n_features(),
        })
    }
}

impl Regressor for ConstantModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, _x: &[f64]) -> f64 {
        self.value
    }
}

/// Hard cluster labels, one per record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<u32>,
}

impl Clustering {
    pub fn new(assignment: Vec<u32>) -> Self {
        Clustering { assignment }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Relabels to `0..k` in first-appearance order.
    pub fn canonical(&self) -> Clustering {
        let mut map = std::collections::HashMap::new();
        let assignment = self
            .assignment
            .iter()
            .map(|&c| {
                let next = map.len() as u32;
                *map.entry(c).or_insert(next)
            })
            .collect();
        Clustering { assignment }
    }
}
