//! Multiplier selection.
//!
//! Squared-error paths of linear constraints have a closed-form multiplier.
//! The overall-MSE constraint has a two-case closed-form solution. Every
//! other single constraint is solved by a dense grid over a bracket followed
//! by bisection on the sign change. Bounds `|Theta| <= c` are handled by
//! complementary slackness: keep the unconstrained fit when it already
//! satisfies the bound, otherwise solve for `Theta = sign(Theta_n) * c`.

mod cases_controls;
mod grid;
mod recursive;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cases_controls::{solve_cases_controls, solve_constraint_system, PAIR_TOLERANCE};
pub use grid::{solve_grid, GridOutcome, MAX_DOUBLINGS, MONOTONE_SAMPLES};
pub use recursive::{
    solve_recursive_2d, solve_recursive_path, walk_recursive_2d, Axis, RecursiveLattice,
    RecursivePath, RecursiveSample, DEFAULT_STEP,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::paths::{
    closed_form_lambda, estimate_constraint, path_ate_ce, path_ate_mse, path_er_cases,
    path_er_overall_mse, path_general_weighted, path_nde_ce, path_nde_mse, second_order_check,
    FairPredictor, PathTable, SecondOrderReport,
};
use crate::problem::{ConstraintKind, ConstraintMode, ConstraintSpec, RiskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Unconstrained,
    ClosedForm,
    TwoCase,
    GridBisection,
    PairGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub lambda: Vec<f64>,
    /// Plug-in constraint at the solution (the cases component for the
    /// cases-and-controls pair).
    pub constraint_value: f64,
    /// All plug-in components at the solution.
    pub constraint_values: Vec<f64>,
    pub mu_active: bool,
    pub iterations: usize,
    pub method: SolveMethod,
    pub report: SecondOrderReport,
}

/// Path member at `lambda` with the admissibility checks of the path ops.
pub fn path_at(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    lambda: f64,
) -> Result<FairPredictor> {
    use ConstraintKind::*;
    use RiskKind::*;
    let mut p = match (spec.constraint, spec.risk) {
        (Ate, MeanSquaredError) => path_ate_mse(eta, lambda)?,
        (Ate, CrossEntropy) => path_ate_ce(eta, lambda)?,
        (Nde, MeanSquaredError) => path_nde_mse(eta, lambda)?,
        (Nde, CrossEntropy) => path_nde_ce(eta, lambda)?,
        (EqualizedRiskCases, _) => path_er_cases(eta, lambda)?,
        (GeneralWeighted, risk) => path_general_weighted(
            eta,
            spec.kappa.clone().ok_or(Error::InvalidArgument(
                "weighted constraint needs a weight function".into(),
            ))?,
            risk,
            lambda,
        )?,
        (other, _) => {
            return Err(Error::Unsupported(format!(
                "{other:?} has no single-multiplier path"
            )))
        }
    };
    p.spec = spec.clone();
    Ok(p)
}

fn finish(
    predictor: FairPredictor,
    data: &Dataset,
    mu_active: bool,
    iterations: usize,
    method: SolveMethod,
) -> Result<(FairPredictor, SolveResult)> {
    let value = estimate_constraint(&predictor.spec, &predictor, &predictor.eta, data)?;
    let report = second_order_check(&predictor, data)?;
    let result = SolveResult {
        lambda: predictor.lambda.clone(),
        constraint_value: value,
        constraint_values: vec![value],
        mu_active,
        iterations,
        method,
        report,
    };
    Ok((predictor, result))
}

fn is_closed_form(spec: &ConstraintSpec) -> bool {
    spec.risk == RiskKind::MeanSquaredError
        && matches!(
            spec.constraint,
            ConstraintKind::Ate | ConstraintKind::Nde | ConstraintKind::GeneralWeighted
        )
}

fn solve_to_target(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    target: f64,
    mu_active: bool,
) -> Result<(FairPredictor, SolveResult)> {
    if is_closed_form(spec) {
        path_at(spec, eta, 0.0)?;
        let lambda = closed_form_lambda(spec, eta, data, target)?;
        return finish(
            path_at(spec, eta, lambda)?,
            data,
            mu_active,
            1,
            SolveMethod::ClosedForm,
        );
    }
    path_at(spec, eta, 0.0)?;
    let g = solve_grid(spec, eta, data, target)?;
    finish(
        path_at(spec, eta, g.lambda)?,
        data,
        mu_active,
        g.iterations,
        SolveMethod::GridBisection,
    )
}

/// Solve `Theta_n(psi_lambda) = 0`.
pub fn solve_equality(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
) -> Result<(FairPredictor, SolveResult)> {
    spec.validate()?;
    if spec.mode != ConstraintMode::Equality {
        return Err(Error::InvalidArgument(
            "solve_equality needs an equality spec".into(),
        ));
    }
    match spec.constraint {
        ConstraintKind::EqualizedRiskCasesAndControls => {
            solve_cases_controls(eta, data, &spec.grid)
        }
        ConstraintKind::EqualizedRiskOverallMse => {
            let p = path_er_overall_mse(eta, data, spec.satisfied_tol)?;
            let method = if p.is_origin() {
                SolveMethod::Unconstrained
            } else {
                SolveMethod::TwoCase
            };
            let mut p = p;
            p.spec = spec.clone();
            finish(p, data, false, 1, method)
        }
        _ => solve_to_target(spec, eta, data, 0.0, false),
    }
}

/// Solve `|Theta_n(psi_lambda)| <= c` by complementary slackness.
pub fn solve_inequality(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
) -> Result<(FairPredictor, SolveResult)> {
    spec.validate()?;
    let ConstraintMode::InequalityAbsBound(c) = spec.mode else {
        return Err(Error::InvalidArgument(
            "solve_inequality needs a bounded spec".into(),
        ));
    };
    match spec.constraint {
        ConstraintKind::EqualizedRiskCasesAndControls => {
            return solve_constraint_system(eta, data, &spec.grid, &[spec.mode; 2]);
        }
        ConstraintKind::EqualizedRiskOverallMse => {
            return Err(Error::Unsupported(
                "bounds on the overall-MSE constraint have no closed-form solution".into(),
            ))
        }
        _ => {}
    }
    let origin = path_at(spec, eta, 0.0)?;
    let theta0 = PathTable::build(spec, eta, data)?.theta(0.0)?;
    if theta0.abs() <= c {
        return finish(origin, data, false, 1, SolveMethod::Unconstrained);
    }
    solve_to_target(spec, eta, data, theta0.signum() * c, true)
}

/// Dispatch on the constraint mode.
pub fn solve(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
) -> Result<(FairPredictor, SolveResult)> {
    match spec.mode {
        ConstraintMode::Equality => solve_equality(spec, eta, data),
        ConstraintMode::InequalityAbsBound(_) => solve_inequality(spec, eta, data),
    }
}
