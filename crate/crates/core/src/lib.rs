//! Estimand-first evaluation of machine learning models: Monte Carlo rank
//! reversal experiments, estimators and their target metrics, uncertainty
//! intervals, and multi-criteria aggregation.

pub mod data;
pub mod error;
pub mod estimand;
pub mod estimators;
pub mod learners;
pub mod mcdm;
pub mod rank_reversal;
pub mod rng;
pub mod runner;
pub mod uncertainty;

pub use error::{Error, Result};
