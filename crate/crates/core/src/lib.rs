//! Penalized quantile regression with wild residual bootstrap inference.

pub mod bootstrap;
pub mod data;
pub mod error;
mod lp;
pub mod montecarlo;
pub mod penalty;
pub mod rng;
pub mod solver;
pub mod tuning;
pub mod weights;

pub use bootstrap::{
    bootstrap_adaptive, bootstrap_lasso, bootstrap_lasso_from, bootstrap_unpenalized, bootstrap_unpenalized_with,
    percentile_ci,
    BootstrapDraws, BootstrapMethod, ConfidenceInterval, ResidualAdjustment,
};
pub use data::{Dataset, QuantileLevel};
pub use error::{Error, Result};
pub use penalty::{
    adaptive_weights, fit_adaptive, threshold_center, AdaptiveWeights, ThresholdRule, ThresholdSequence,
    ThresholdSource,
};
pub use solver::{check_loss, fit, kkt_residual, FitResult, PenaltySpec};
pub use tuning::{bic_select, cv_select, select_a_n, LambdaGrid};
pub use weights::{verify_conditions, ConditionReport, LawKind, WeightLaw, WeightSampler};
pub use montecarlo::{oracle_cov, run_study, Method, PaperDesign, SimReport, StudyConfig};
