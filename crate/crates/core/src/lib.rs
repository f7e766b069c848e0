//! Outlier-robust inference for high-dimensional linear regression.
//!
//! For the model `y_i = d_i' alpha + x_i' beta + gamma_i + u_i`, where the
//! shifts `gamma_i` are nonzero only for a small set of outlying rows, the
//! crate estimates `alpha` in two steps:
//!
//! 1. each of `y` and the treatment columns of `D` is regressed on the
//!    controls `X` with a square-root lasso that also penalizes per-row
//!    shift parameters (see [`first_stage`]);
//! 2. the outcome residual is regressed on the treatment residuals by OLS,
//!    which yields `alpha_hat`, standard errors and normal confidence
//!    intervals (see [`inference`]).
//!
//! [`sim`] holds the simulation design and Monte Carlo harness.
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the usual double-precision instantiation. There is no
//! intercept: append a constant column to `X` if one is needed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod first_stage;
pub mod inference;
pub mod linalg;
pub mod prox;
pub mod scalar;
pub mod sim;

pub use data::{column_scaler, validate_dataset, ColumnScaler, Dataset, PenaltyPlan};
pub use error::{Error, Result};
pub use first_stage::{
    augmented_objective, default_penalties, fit_first_stage, robust_objective, FirstStageFit,
    SolverOptions,
};
pub use inference::{
    confidence_intervals, normal_quantile, ols_on_residuals, orthogonal_moment, two_step_fit,
    InferenceReport, InferenceResult,
};
pub use prox::{lasso_fit, soft_threshold, LassoProblem, LassoSolution};
pub use scalar::Scalar;
pub use sim::{generate_dgp, run_monte_carlo, MonteCarloReport, SimulationConfig};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ColumnScaler64 = ColumnScaler<f64>;
pub type PenaltyPlan64 = PenaltyPlan<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type FirstStageFit64 = FirstStageFit<f64>;
pub type InferenceResult64 = InferenceResult<f64>;
pub type ColumnScaler32 = ColumnScaler<f32>;
pub type PenaltyPlan32 = PenaltyPlan<f32>;
pub type SolverOptions32 = SolverOptions<f32>;
pub type FirstStageFit32 = FirstStageFit<f32>;
pub type InferenceResult32 = InferenceResult<f32>;
