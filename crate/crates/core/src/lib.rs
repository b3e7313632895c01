//! Fair prediction by constrained risk minimization.
//!
//! The unconstrained risk minimizer (a regression or classification
//! function) is fitted first. Each fairness constraint then defines a
//! one-parameter family of penalized minimizers indexed by a Lagrange
//! multiplier, available in closed form for the implemented (risk,
//! constraint) pairs. The solver picks the multiplier whose plug-in
//! constraint estimate is zero, or meets a bound.
//!
//! Modules:
//! - [`data`]: role-tagged datasets, CSV loading, splits.
//! - [`nuisance`]: OLS, logistic IRLS and cross-validated lasso learners and
//!   the fitted nuisance bundle.
//! - [`paths`]: gradients, path maps, plug-in estimates, second-order checks.
//! - [`solver`]: multiplier selection (closed form, grid plus bisection,
//!   inequality bounds, two-constraint search, Euler steppers).
//! - [`sim`]: data-generating processes, oracle evaluation and Monte Carlo
//!   experiments.

pub mod data;
pub mod error;
pub mod nuisance;
pub mod paths;
pub mod problem;
pub mod rng;
pub mod sim;
pub mod solver;

pub use data::{load_csv, split, Column, ColumnRole, Dataset, Point, Schema};
pub use error::{Error, ErrorCategory, Result};
pub use nuisance::{fit_nuisances, NuisanceConfig, NuisanceSet};
pub use paths::{FairPredictor, Predictor};
pub use problem::{ConstraintKind, ConstraintMode, ConstraintSpec, GridConfig, Kappa, RiskKind};
pub use solver::{solve, solve_equality, solve_inequality, SolveResult};
