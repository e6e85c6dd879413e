//! Regularized alternating least squares for the TT weights.

pub mod cv;
pub mod fit;
pub mod penalty;
pub mod subproblem;

pub use cv::{cross_validate_lambda, fold_ranges, CvResult, CvScore};
pub use fit::{als_fit, fit_regressors, initial_train, objective, FitConfig, SweepTrace, UpdateRecord};
pub use penalty::{build_omega, dense_penalty, difference_matrix, PenaltyBlocks};
pub use subproblem::{build_a, solve_penalized, update_core, SolveInfo, CONDITION_LIMIT};
