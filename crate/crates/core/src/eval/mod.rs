//! Evaluation metrics and the linear-fractional metric theory.

mod metrics;
mod theory;

pub use metrics::{auprc, auroc, f1_score, MetricError, MetricsReport};
pub use theory::{
    brute_force_optimal, metric_value, optimal_threshold_formula, BruteForceResult,
    CompareDirection, FiniteInstance, MetricCoefficients, OptimalThreshold, TheoryError,
};
