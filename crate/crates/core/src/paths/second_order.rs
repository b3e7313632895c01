//! Second-order sufficiency check for a single binary-attribute constraint.
//!
//! With two prediction values per covariate row (one for each group) and one
//! constraint, the bordered Hessian is 3 x 3 and its determinant reduces to
//! `-D(psi1)^2 L''(psi0) - D(psi0)^2 L''(psi1)` where `D` is the constraint
//! gradient and `L''` the second derivative of the pointwise Lagrangian. A
//! negative value at every row certifies a constrained minimum.

use serde::{Deserialize, Serialize};

use super::gradients::{gradient_constraint, gradient_constraint_dpsi, hessian_risk};
use super::ops::er_cases_range;
use super::predictor::{FairPredictor, Predictor};
use crate::data::{Dataset, Point};
use crate::error::Result;
use crate::problem::ConstraintKind;

/// Rows within this distance of zero make the check inconclusive.
pub const INCONCLUSIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminantSign {
    Minimum,
    NotMinimum,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderDetails {
    pub rows: usize,
    pub min: f64,
    pub max: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub determinant_sign: DeterminantSign,
    pub lambda_range_ok: bool,
    pub details: SecondOrderDetails,
}

pub fn second_order_check(predictor: &FairPredictor, data: &Dataset) -> Result<SecondOrderReport> {
    let spec = &predictor.spec;
    let eta = &*predictor.eta;
    let lambda = predictor.lambda[0];
    let lambda_range_ok = if spec.constraint == ConstraintKind::EqualizedRiskCases {
        let (lo, hi) = er_cases_range(eta);
        lambda > lo && lambda < hi
    } else {
        true
    };
    if spec.constraint == ConstraintKind::EqualizedRiskCasesAndControls {
        return Ok(SecondOrderReport {
            determinant_sign: DeterminantSign::Inconclusive,
            lambda_range_ok,
            details: SecondOrderDetails {
                rows: 0,
                min: f64::NAN,
                max: f64::NAN,
                note: Some("two constraints on two values per row leave no free direction".into()),
            },
        });
    }
    let levels = eta.mediator_levels();
    let (mut min, mut max, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    let mut near_zero = false;
    for i in 0..data.n() {
        let w = data.w(i);
        for &m in levels {
            let mut grad = [0.0; 2];
            let mut curv = [0.0; 2];
            for x in [0usize, 1] {
                let z = Point {
                    row: Some(i),
                    x: x as f64,
                    m,
                    w,
                };
                let psi = predictor.predict(&z)?;
                grad[x] = gradient_constraint(spec, eta, &z, psi)?;
                curv[x] = hessian_risk(spec.risk, psi, eta.psi(&z))?
                    + lambda * gradient_constraint_dpsi(spec, eta, &z, psi)?;
            }
            let e = -grad[1] * grad[1] * curv[0] - grad[0] * grad[0] * curv[1];
            near_zero |= e.abs() <= INCONCLUSIVE_TOL;
            min = min.min(e);
            max = max.max(e);
            count += 1;
        }
    }
    let determinant_sign = if near_zero {
        DeterminantSign::Inconclusive
    } else if max < 0.0 {
        DeterminantSign::Minimum
    } else {
        DeterminantSign::NotMinimum
    };
    Ok(SecondOrderReport {
        determinant_sign,
        lambda_range_ok,
        details: SecondOrderDetails {
            rows: count,
            min,
            max,
            note: None,
        },
    })
}
