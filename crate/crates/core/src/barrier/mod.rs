//! Barrier weights and the local metrics built from them.

mod dense;
mod sparse;
mod weights;

pub use dense::{dense_metric, hessian_dense, scaled_constraints, slack, DenseMetric, MIN_SLACK_REL};
pub use sparse::{
    metric_sparse, sparse_metric, SparseBody, SparseMetric, SparseOracle, DEFAULT_EPSILON,
    MIN_COORD_REL,
};
pub use weights::{
    dikin_weights, john_constants, john_weights, john_weights_with, lee_sidford_exponent,
    leverage_scores, ls_weights, ls_weights_with, vaidya_weights, vaidya_weights_with,
    weights_with, DenseOracle, LeverageOracle, WeightKind, Weights,
};
