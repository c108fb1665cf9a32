//! Locally D-optimal allocations for 2^k factorial experiments under
//! generalized linear models.
//!
//! Design points are enumerated so that point i (0-based) takes the binary
//! expansion of i, most significant bit for factor 1, with digit 0 meaning
//! level +1 and digit 1 meaning level −1. For k = 2 the order is
//! (+,+), (+,−), (−,+), (−,−).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod links;
pub mod model;
pub mod robustness;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use links::{weights_for_design, Beta, LinkKind, WeightVector};
pub use model::{
    det_criterion, info_matrix, objective_l, Design, Effect, ModelSpec, VarianceVector,
};
pub use solver::{solve, Method, SolveOptions, SolveResult};
