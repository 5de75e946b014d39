//! Performance estimators and the target metrics they estimate.

mod benchmark;
mod clustering;
mod regression;

pub use benchmark::{
    estimate_item_difficulty, metadata_strata, stratified_success_rates, Difficulty, DifficultyStrata,
};
pub use clustering::{
    cluster_decomposed_f, pair_composition, pair_counts, pairwise_prf, plugin_f_on_cluster_sample, ClusterProfile,
    ClusterTerms, DecomposedEstimate, PairComposition, PairCounts, Prf,
};
pub use regression::{
    cross_validate, loo_ols_exact, loo_shortcut, prediction_plausibility_check, true_generalization_error, CvScheme,
    PlausibilityReport,
};
