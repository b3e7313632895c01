//! Regression learners and the fitted nuisance bundle they produce.

mod lasso;
mod logistic;
mod model;
mod ols;
mod set;

pub use lasso::{fit_lasso_cv, fit_lasso_path, penalty_grid, penalty_max, PENALTY_RATIO};
pub use logistic::{fit_logistic_irls, SEPARATION_THRESHOLD};
pub use model::{
    clip_probability, expit, logit, Design, FitDiagnostics, LearnerKind, Link, RegressionModel,
    DEFAULT_EPS,
};
pub use ols::fit_ols;
pub use set::{
    fit_nuisances, Component, KnownFn, KnownNuisances, LearnerChoice, NuisanceConfig, NuisanceDoc,
    NuisanceSet, Source, DEFAULT_SIGMA2_FLOOR,
};
