//! Hypothesis tests linking value conflict to disagreement, and the
//! covariance/MDS diagnostic of estimated profiles.

pub mod bayes;
pub mod grid;
pub mod mds;
pub mod quadrature;

pub use bayes::{
    jzs_bf10, jzs_bf10_from_t, jzs_log_bf10_from_t, two_sample_t, BayesFactorResult, EvidenceBin, Tail,
    DEFAULT_PRIOR_SCALE,
};
pub use grid::{
    group_mean, group_scores, prepare_profiles, run_grid, split_groups, CellOutcome, GridCell, GridConfig, Groups,
    TailPolicy, DEFAULT_THRESHOLDS,
};
pub use mds::{classical_mds, value_covariance, MdsEmbedding};
