//! Constraint-specific paths: gradients, closed-form path maps, plug-in
//! constraint estimates and second-order checks.

mod estimate;
mod gradients;
mod ops;
mod pointwise;
mod predictor;
mod second_order;

pub(crate) use estimate::{build_plans, PathTable};
pub use estimate::{estimate_cases_controls, estimate_constraint, estimate_constraint_observed};
pub use gradients::{
    ate_weight, case_weight, control_weight, gradient_cases_controls, gradient_cases_controls_dpsi,
    gradient_constraint, gradient_constraint_dpsi, gradient_risk, group_weight, hessian_risk,
    linear_weight, nde_weight,
};
pub(crate) use ops::closed_form_lambda;
pub use ops::{
    cases_controls_range, er_cases_range, lambda_ate_mse_closed, lambda_general_mse_closed,
    lambda_nde_mse_closed, path_ate_ce, path_ate_mse, path_cases_controls, path_er_cases,
    path_er_overall_mse, path_general_weighted, path_nde_ce, path_nde_mse,
};
pub use pointwise::{
    case_reweight, cases_controls, linear_shift, quadratic_residual, unit_root, LAMBDA_ZERO,
};
pub use predictor::{
    Adjustment, FairPredictor, FnPredictor, Predictor, PredictorDoc, TabulatedPredictor,
};
pub use second_order::{
    second_order_check, DeterminantSign, SecondOrderDetails, SecondOrderReport,
};
