//! Projection-coefficient estimators: the exact oracle, the consistent
//! oblique baseline, and small trainable maps from a warm start.

mod learned;
mod oblique;

pub use learned::{
    estimate_coeffs, estimate_stacked, train_ensemble, train_estimator, train_shared, Estimator, EstimatorKind,
    Init, Optimizer, Sample, TrainConfig, TrainReport, POOLED_FEATURES,
};
pub use oblique::{build_oblique, build_oblique_min_norm, oblique_coeffs, oracle_coeffs, ObliqueOperator, CONSISTENCY_TOL};
