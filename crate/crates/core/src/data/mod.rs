//! Datasets, sampling schemes, diagnostics, and synthetic generators.

mod diagnostics;
mod embeddings;
mod items;
mod sampling;
mod tabular;

pub use diagnostics::{
    excess_kurtosis, feature_distribution_report, feature_histograms, ks_statistic_sorted,
    quantile_sorted, DistributionReport, FeatureDiagnostics, HistogramBin, HISTOGRAM_BINS,
    KS_FLAG_THRESHOLD, QUANTILE_LEVELS,
};
pub use embeddings::{
    generate_synthetic_identities, load_embeddings_csv, read_embeddings_csv, write_embeddings_csv,
    EmbeddingDataset, IdentityGenerator,
};
pub use items::{
    generate_item_responses, load_item_responses_csv, read_item_responses_csv,
    write_item_responses_csv, Item, ItemResponseMatrix, ItemResponseSpec, ModelRates,
};
pub use sampling::{
    indices_with_replacement, sample_with_replacement, sample_without_replacement,
    stratified_sample,
};
pub use tabular::{load_california, load_tabular_csv, read_tabular_csv, TabularDataset, CALIFORNIA_SCHEMA};
