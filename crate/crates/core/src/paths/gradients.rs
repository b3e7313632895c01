//! Canonical gradients of the risks and constraints, evaluated pointwise.
//!
//! All constraint gradients are taken with respect to the prediction at a
//! point `(x, m, w)` and are expressed with the unconstrained fit `psi0`
//! standing in for the true regression function.

use crate::data::Point;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::problem::{ConstraintKind, ConstraintSpec, RiskKind};

fn check_unit(psi: f64) -> Result<()> {
    if psi > 0.0 && psi < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError { value: psi })
    }
}

/// Risk gradient: `2(psi - psi0)` or `(1-psi0)/(1-psi) - psi0/psi`.
pub fn gradient_risk(risk: RiskKind, psi: f64, psi0: f64) -> Result<f64> {
    match risk {
        RiskKind::MeanSquaredError => Ok(2.0 * (psi - psi0)),
        RiskKind::CrossEntropy => {
            check_unit(psi)?;
            Ok((1.0 - psi0) / (1.0 - psi) - psi0 / psi)
        }
    }
}

/// Derivative of [`gradient_risk`] in `psi`.
pub fn hessian_risk(risk: RiskKind, psi: f64, psi0: f64) -> Result<f64> {
    match risk {
        RiskKind::MeanSquaredError => Ok(2.0),
        RiskKind::CrossEntropy => {
            check_unit(psi)?;
            Ok((1.0 - psi0) / (1.0 - psi).powi(2) + psi0 / (psi * psi))
        }
    }
}

/// `(2x - 1) / pi(x | w)`.
pub fn ate_weight(eta: &NuisanceSet, z: &Point) -> f64 {
    (2.0 * z.x - 1.0) / eta.pi(z.x, z.w)
}

/// Average-effect weight times the mediator likelihood ratio
/// `gamma(m | 0, w) / gamma(m | x, w)`.
pub fn nde_weight(eta: &NuisanceSet, z: &Point) -> Result<f64> {
    let m = z.m.ok_or(Error::MissingMediator)?;
    Ok(ate_weight(eta, z) * eta.gamma(m, 0.0, z.w)? / eta.gamma(m, z.x, z.w)?)
}

/// `(2x - 1) / q(x)` with `q` the case probability of group `x`.
pub fn case_weight(eta: &NuisanceSet, x: f64) -> f64 {
    (2.0 * x - 1.0) / eta.p1(x)
}

/// `(2x - 1) / q0(x)` with `q0` the control probability of group `x`.
pub fn control_weight(eta: &NuisanceSet, x: f64) -> f64 {
    (2.0 * x - 1.0) / eta.p_controls(x)
}

/// `(2x - 1) / P(X = x)`.
pub fn group_weight(eta: &NuisanceSet, x: f64) -> f64 {
    (2.0 * x - 1.0) / eta.p(x)
}

/// Weight `c(z)` entering the linear-in-prediction constraints, so that the
/// constraint gradient is `c(z)` itself.
pub fn linear_weight(spec: &ConstraintSpec, eta: &NuisanceSet, z: &Point) -> Result<f64> {
    match spec.constraint {
        ConstraintKind::Ate => Ok(ate_weight(eta, z)),
        ConstraintKind::Nde => nde_weight(eta, z),
        ConstraintKind::GeneralWeighted => spec
            .kappa
            .as_ref()
            .ok_or(Error::InvalidArgument(
                "weighted constraint needs a weight function".into(),
            ))?
            .eval(eta, z),
        other => Err(Error::Unsupported(format!(
            "{other:?} is not linear in the prediction"
        ))),
    }
}

/// Constraint gradient `D_Theta` at `z` for prediction value `psi`.
pub fn gradient_constraint(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    z: &Point,
    psi: f64,
) -> Result<f64> {
    match spec.constraint {
        ConstraintKind::Ate | ConstraintKind::Nde | ConstraintKind::GeneralWeighted => {
            linear_weight(spec, eta, z)
        }
        ConstraintKind::EqualizedRiskCases => {
            check_unit(psi)?;
            Ok(-case_weight(eta, z.x) * eta.psi(z) / psi)
        }
        ConstraintKind::EqualizedRiskOverallMse => {
            Ok(2.0 * group_weight(eta, z.x) * (psi - eta.psi(z)))
        }
        ConstraintKind::EqualizedRiskCasesAndControls => Err(Error::Unsupported(
            "cases and controls has two gradients; use gradient_cases_controls".into(),
        )),
    }
}

/// Derivative of [`gradient_constraint`] in `psi`.
pub fn gradient_constraint_dpsi(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    z: &Point,
    psi: f64,
) -> Result<f64> {
    match spec.constraint {
        ConstraintKind::Ate | ConstraintKind::Nde | ConstraintKind::GeneralWeighted => Ok(0.0),
        ConstraintKind::EqualizedRiskCases => {
            check_unit(psi)?;
            Ok(case_weight(eta, z.x) * eta.psi(z) / (psi * psi))
        }
        ConstraintKind::EqualizedRiskOverallMse => Ok(2.0 * group_weight(eta, z.x)),
        ConstraintKind::EqualizedRiskCasesAndControls => Err(Error::Unsupported(
            "cases and controls has two gradients; use gradient_cases_controls".into(),
        )),
    }
}

/// Gradients of the (cases, controls) constraint pair at `z`, for the
/// predicted case probability `q`.
pub fn gradient_cases_controls(eta: &NuisanceSet, z: &Point, q: f64) -> Result<[f64; 2]> {
    check_unit(q)?;
    let psi0 = eta.psi(z);
    Ok([
        -case_weight(eta, z.x) * psi0 / q,
        control_weight(eta, z.x) * (1.0 - psi0) / (1.0 - q),
    ])
}

/// Derivatives of [`gradient_cases_controls`] in `q`.
pub fn gradient_cases_controls_dpsi(eta: &NuisanceSet, z: &Point, q: f64) -> Result<[f64; 2]> {
    check_unit(q)?;
    let psi0 = eta.psi(z);
    Ok([
        case_weight(eta, z.x) * psi0 / (q * q),
        control_weight(eta, z.x) * (1.0 - psi0) / (1.0 - q).powi(2),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_gradients() {
        assert_eq!(
            gradient_risk(RiskKind::MeanSquaredError, 0.3, 0.3).unwrap(),
            0.0
        );
        assert_eq!(
            gradient_risk(RiskKind::CrossEntropy, 0.5, 0.5).unwrap(),
            0.0
        );
        let g = gradient_risk(RiskKind::CrossEntropy, 0.25, 0.5).unwrap();
        assert!((g + 4.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            gradient_risk(RiskKind::CrossEntropy, 1.0, 0.5),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn risk_hessian_matches_finite_difference() {
        for &(psi, psi0) in &[(0.2, 0.7), (0.6, 0.1), (0.5, 0.5)] {
            let h = 1e-6;
            let fd = (gradient_risk(RiskKind::CrossEntropy, psi + h, psi0).unwrap()
                - gradient_risk(RiskKind::CrossEntropy, psi - h, psi0).unwrap())
                / (2.0 * h);
            let an = hessian_risk(RiskKind::CrossEntropy, psi, psi0).unwrap();
            assert!((fd - an).abs() / an < 1e-7);
        }
    }
}
