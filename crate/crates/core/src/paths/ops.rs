//! Constructors for every implemented path and the closed-form multipliers.

use std::sync::Arc;

use super::estimate::{MapKind, PathTable};
use super::predictor::{arm_radicand, Adjustment, FairPredictor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::problem::{ConstraintKind, ConstraintSpec, Kappa, RiskKind};

fn spec(constraint: ConstraintKind, risk: RiskKind) -> ConstraintSpec {
    ConstraintSpec::new(constraint, risk)
}

fn require_mediator(eta: &NuisanceSet) -> Result<()> {
    if eta.has_gamma() && eta.psi_uses_mediator {
        Ok(())
    } else {
        Err(Error::MissingMediator)
    }
}

pub fn path_ate_mse(eta: &Arc<NuisanceSet>, lambda: f64) -> Result<FairPredictor> {
    eta.check_groups()?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(ConstraintKind::Ate, RiskKind::MeanSquaredError),
        vec![lambda],
    ))
}

pub fn path_ate_ce(eta: &Arc<NuisanceSet>, lambda: f64) -> Result<FairPredictor> {
    eta.check_groups()?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(ConstraintKind::Ate, RiskKind::CrossEntropy),
        vec![lambda],
    ))
}

pub fn path_nde_mse(eta: &Arc<NuisanceSet>, lambda: f64) -> Result<FairPredictor> {
    require_mediator(eta)?;
    eta.check_groups()?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(ConstraintKind::Nde, RiskKind::MeanSquaredError),
        vec![lambda],
    ))
}

pub fn path_nde_ce(eta: &Arc<NuisanceSet>, lambda: f64) -> Result<FairPredictor> {
    require_mediator(eta)?;
    eta.check_groups()?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(ConstraintKind::Nde, RiskKind::CrossEntropy),
        vec![lambda],
    ))
}

/// Admissible open interval for the equalized-case-risk multiplier.
pub fn er_cases_range(eta: &NuisanceSet) -> (f64, f64) {
    (-eta.p1(1.0), eta.p1(0.0))
}

/// Admissible open intervals for the (cases, controls) multipliers.
pub fn cases_controls_range(eta: &NuisanceSet) -> [(f64, f64); 2] {
    [
        (-eta.p1(1.0), eta.p1(0.0)),
        (-eta.p_controls(1.0), eta.p_controls(0.0)),
    ]
}

fn check_range(lambda: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if lambda > lo && lambda < hi {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange { lambda, lo, hi })
    }
}

fn check_case_probs(eta: &NuisanceSet) -> Result<()> {
    eta.check_groups()?;
    for x in 0..2u8 {
        let q = eta.p1[x as usize].min(eta.p_controls[x as usize]);
        if q <= 0.0 {
            return Err(Error::DegeneratePropensity { x, value: q });
        }
    }
    Ok(())
}

pub fn path_er_cases(eta: &Arc<NuisanceSet>, lambda: f64) -> Result<FairPredictor> {
    check_case_probs(eta)?;
    check_range(lambda, er_cases_range(eta))?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(ConstraintKind::EqualizedRiskCases, RiskKind::CrossEntropy),
        vec![lambda],
    ))
}

pub fn path_cases_controls(eta: &Arc<NuisanceSet>, l1: f64, l2: f64) -> Result<FairPredictor> {
    check_case_probs(eta)?;
    let [r1, r2] = cases_controls_range(eta);
    check_range(l1, r1)?;
    check_range(l2, r2)?;
    Ok(FairPredictor::on_path(
        eta.clone(),
        spec(
            ConstraintKind::EqualizedRiskCasesAndControls,
            RiskKind::CrossEntropy,
        ),
        vec![l1, l2],
    ))
}

pub fn path_general_weighted(
    eta: &Arc<NuisanceSet>,
    kappa: Kappa,
    risk: RiskKind,
    lambda: f64,
) -> Result<FairPredictor> {
    Ok(FairPredictor::on_path(
        eta.clone(),
        ConstraintSpec::weighted(kappa, risk),
        vec![lambda],
    ))
}

/// Two-case solution for equal overall squared error.
///
/// Keeps the unconstrained fit when its plug-in is already below `tol`.
/// Otherwise the group with the smaller estimated risk has its predictions
/// moved by the square root of the pointwise variance gap, which equalizes
/// the two group risks.
pub fn path_er_overall_mse(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    tol: f64,
) -> Result<FairPredictor> {
    eta.check_groups()?;
    let s = spec(
        ConstraintKind::EqualizedRiskOverallMse,
        RiskKind::MeanSquaredError,
    );
    let origin = FairPredictor::unconstrained(eta.clone(), s.clone());
    let theta = super::estimate::estimate_constraint(&s, &origin, eta, data)?;
    if theta.abs() < tol {
        return Ok(origin);
    }
    let mut gap = 0.0;
    for i in 0..data.n() {
        let w = data.w(i);
        gap += eta.pi(0.0, w) / eta.p(0.0) * eta.sigma2(0.0, w)?
            - eta.pi(1.0, w) / eta.p(1.0) * eta.sigma2(1.0, w)?;
    }
    gap /= data.n() as f64;
    let (arm, lambda) = if gap > 0.0 {
        (1u8, -eta.p(1.0))
    } else if gap < 0.0 {
        (0u8, eta.p(0.0))
    } else {
        return Ok(origin);
    };
    for i in 0..data.n() {
        let r = arm_radicand(eta, data.w(i), arm)?;
        if r < -1e-10 {
            return Err(Error::NegativeRadicand { row: i, value: r });
        }
    }
    Ok(FairPredictor {
        eta: eta.clone(),
        spec: s,
        lambda: vec![lambda],
        adjustment: Adjustment::ShiftArm { arm },
    })
}

/// Multiplier putting the squared-error path of a linear constraint on
/// `target`: `2 (Theta(psi_n) - target) / sum(coef * weight)`.
pub(crate) fn closed_form_lambda(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    data: &Dataset,
    target: f64,
) -> Result<f64> {
    let table = PathTable::build(spec, eta, data)?;
    if table.map != MapKind::Linear {
        return Err(Error::Unsupported(
            "closed-form multiplier needs a squared-error linear path".into(),
        ));
    }
    let curvature = table.linear_curvature();
    if curvature.abs() < 1e-12 {
        return Err(Error::ZeroWeight(curvature));
    }
    Ok(2.0 * (table.theta(0.0)? - target) / curvature)
}

/// `2 sum(psi_n(1, W_i) - psi_n(0, W_i)) / sum(1/pi(1|W_i) + 1/pi(0|W_i))`.
pub fn lambda_ate_mse_closed(eta: &NuisanceSet, data: &Dataset) -> Result<f64> {
    eta.check_groups()?;
    closed_form_lambda(
        &spec(ConstraintKind::Ate, RiskKind::MeanSquaredError),
        eta,
        data,
        0.0,
    )
}

/// Closed-form multiplier of the natural-direct-effect squared-error path.
pub fn lambda_nde_mse_closed(eta: &NuisanceSet, data: &Dataset) -> Result<f64> {
    require_mediator(eta)?;
    eta.check_groups()?;
    closed_form_lambda(
        &spec(ConstraintKind::Nde, RiskKind::MeanSquaredError),
        eta,
        data,
        0.0,
    )
}

/// `2 Theta(psi_n) / mean(kappa^2)` for the weighted constraint.
pub fn lambda_general_mse_closed(eta: &NuisanceSet, kappa: &Kappa, data: &Dataset) -> Result<f64> {
    closed_form_lambda(
        &ConstraintSpec::weighted(kappa.clone(), RiskKind::MeanSquaredError),
        eta,
        data,
        0.0,
    )
}
