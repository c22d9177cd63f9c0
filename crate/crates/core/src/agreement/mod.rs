//! Agreement prediction: TF-IDF text features with user context stacks,
//! a logistic-regression classifier and a majority baseline.

pub mod features;
pub mod logreg;
pub mod metrics;
pub mod tfidf;

pub use features::{
    build_bundles, make_context, read_bundles, read_user_features, time_split, user_centroid, write_bundles,
    BundleConfig, BundleHeader, BundleReport, BundleSet, ContextKind, ContextSources, FeatureBundle, Split,
    Standardizer, UserFeatures,
};
pub use logreg::{bundle_row, gradient_check, LogReg, LogRegConfig};
pub use metrics::{evaluate, majority_label, write_results_csv, DeltaSymbol, ResultRow, Scores};
pub use tfidf::{SparseVec, TfidfVectorizer, DEFAULT_VOCAB};
