//! Plug-in constraint estimates.
//!
//! Every plug-in is a weighted sum `sum_k coef_k * T(psi(z_k))` over a fixed
//! set of evaluation points `z_k` built from the data and the nuisances (an
//! [`EvalPlan`]). The average-effect functionals integrate the sensitive
//! attribute (and mediator) out against the fitted laws at every observed
//! covariate row; the risk-equalizing functionals use the observed rows.
//! Path searches precompute the unconstrained prediction and the path weight
//! at every evaluation point once ([`PathTable`]) so that evaluating the
//! plug-in at a new multiplier costs one pass over plain arrays.

use super::gradients::{case_weight, control_weight, group_weight, linear_weight};
use super::pointwise::{case_reweight, cases_controls, linear_shift, unit_root};
use super::predictor::Predictor;
use crate::data::{Dataset, Point};
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::problem::{ConstraintKind, ConstraintSpec, Kappa, RiskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Transform {
    Identity,
    /// `-log psi`: cross-entropy loss of a case.
    NegLog,
    /// `-log(1 - psi)`: cross-entropy loss of a control.
    NegLogComplement,
    /// `(y - psi)^2`.
    SquaredError,
}

impl Transform {
    #[inline]
    fn apply(self, psi: f64, y: f64) -> f64 {
        match self {
            Transform::Identity => psi,
            Transform::NegLog => -psi.ln(),
            Transform::NegLogComplement => -(1.0 - psi).ln(),
            Transform::SquaredError => (y - psi) * (y - psi),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EvalPoint {
    pub row: usize,
    pub x: f64,
    pub m: Option<f64>,
    pub coef: f64,
    pub y: f64,
}

impl EvalPoint {
    pub fn point<'a>(&self, data: &'a Dataset) -> Point<'a> {
        Point {
            row: Some(self.row),
            x: self.x,
            m: self.m,
            w: data.w(self.row),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EvalPlan {
    pub points: Vec<EvalPoint>,
    pub transform: Transform,
}

impl EvalPlan {
    pub fn evaluate(&self, data: &Dataset, predictor: &dyn Predictor) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.points {
            if e.coef == 0.0 {
                continue;
            }
            total += e.coef
                * self
                    .transform
                    .apply(predictor.predict(&e.point(data))?, e.y);
        }
        Ok(total)
    }
}

fn require_mediator(eta: &NuisanceSet) -> Result<()> {
    if !eta.psi_uses_mediator || !eta.has_gamma() {
        return Err(Error::MissingMediator);
    }
    Ok(())
}

fn observed_plan(
    data: &Dataset,
    transform: Transform,
    mut coef: impl FnMut(f64, f64) -> f64,
) -> Result<EvalPlan> {
    let n = data.n() as f64;
    let x = data.x();
    let y = data.y()?;
    let points = (0..data.n())
        .map(|i| EvalPoint {
            row: i,
            x: x[i],
            m: None,
            coef: coef(x[i], y[i]) / n,
            y: y[i],
        })
        .collect();
    Ok(EvalPlan { points, transform })
}

/// Evaluation plans for the configured constraint (two for cases and controls).
pub(crate) fn build_plans(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    data: &Dataset,
) -> Result<Vec<EvalPlan>> {
    let n = data.n() as f64;
    let rows = 0..data.n();
    Ok(match spec.constraint {
        ConstraintKind::Ate => {
            let mut points = Vec::with_capacity(2 * data.n());
            for i in rows {
                for x in [0.0, 1.0] {
                    points.push(EvalPoint {
                        row: i,
                        x,
                        m: None,
                        coef: (2.0 * x - 1.0) / n,
                        y: 0.0,
                    });
                }
            }
            vec![EvalPlan {
                points,
                transform: Transform::Identity,
            }]
        }
        ConstraintKind::Nde => {
            require_mediator(eta)?;
            let mut points = Vec::with_capacity(4 * data.n());
            for i in rows {
                let w = data.w(i);
                for x in [0.0, 1.0] {
                    for m in [0.0, 1.0] {
                        let coef = (2.0 * x - 1.0) * eta.gamma(m, 0.0, w)? / n;
                        points.push(EvalPoint {
                            row: i,
                            x,
                            m: Some(m),
                            coef,
                            y: 0.0,
                        });
                    }
                }
            }
            vec![EvalPlan {
                points,
                transform: Transform::Identity,
            }]
        }
        ConstraintKind::GeneralWeighted => {
            let kappa = spec.kappa.as_ref().ok_or(Error::InvalidArgument(
                "weighted constraint needs a weight function".into(),
            ))?;
            let with_m = eta.psi_uses_mediator || kappa.uses_mediator(eta);
            let mut points = Vec::new();
            for i in rows {
                let w = data.w(i);
                for x in [0.0, 1.0] {
                    let px = eta.pi(x, w);
                    let levels: &[Option<f64>] = if with_m {
                        &[Some(0.0), Some(1.0)]
                    } else {
                        &[None]
                    };
                    for &m in levels {
                        let pm = match m {
                            Some(m) => eta.gamma(m, x, w)?,
                            None => 1.0,
                        };
                        let z = Point {
                            row: Some(i),
                            x,
                            m,
                            w,
                        };
                        let coef = px * pm * kappa.eval(eta, &z)? / n;
                        points.push(EvalPoint {
                            row: i,
                            x,
                            m,
                            coef,
                            y: 0.0,
                        });
                    }
                }
            }
            vec![EvalPlan {
                points,
                transform: Transform::Identity,
            }]
        }
        ConstraintKind::EqualizedRiskCases => {
            vec![observed_plan(data, Transform::NegLog, |x, y| {
                y * case_weight(eta, x)
            })?]
        }
        ConstraintKind::EqualizedRiskOverallMse => {
            vec![observed_plan(data, Transform::SquaredError, |x, _| {
                group_weight(eta, x)
            })?]
        }
        ConstraintKind::EqualizedRiskCasesAndControls => vec![
            observed_plan(data, Transform::NegLog, |x, y| y * case_weight(eta, x))?,
            observed_plan(data, Transform::NegLogComplement, |x, y| {
                (1.0 - y) * control_weight(eta, x)
            })?,
        ],
    })
}

/// Plug-in estimate of the configured constraint for `predictor`.
///
/// For the pair of case and control constraints use
/// [`estimate_cases_controls`].
pub fn estimate_constraint(
    spec: &ConstraintSpec,
    predictor: &dyn Predictor,
    eta: &NuisanceSet,
    data: &Dataset,
) -> Result<f64> {
    if spec.constraint == ConstraintKind::EqualizedRiskCasesAndControls {
        return Err(Error::Unsupported(
            "cases and controls yields two values; use estimate_cases_controls".into(),
        ));
    }
    build_plans(spec, eta, data)?[0].evaluate(data, predictor)
}

/// Plug-in estimates `[cases, controls]` of the two equalized-risk
/// constraints.
pub fn estimate_cases_controls(
    predictor: &dyn Predictor,
    eta: &NuisanceSet,
    data: &Dataset,
) -> Result<[f64; 2]> {
    let spec = ConstraintSpec::new(
        ConstraintKind::EqualizedRiskCasesAndControls,
        RiskKind::CrossEntropy,
    );
    let plans = build_plans(&spec, eta, data)?;
    Ok([
        plans[0].evaluate(data, predictor)?,
        plans[1].evaluate(data, predictor)?,
    ])
}

/// Plug-in estimate from predictions at the observed rows only.
///
/// Available for the constraints whose plug-in needs no counterfactual
/// predictions; the weighted constraint uses the empirical average
/// `mean(kappa(Z_i) psi_i)`.
pub fn estimate_constraint_observed(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    data: &Dataset,
    predictions: &[f64],
) -> Result<Vec<f64>> {
    if predictions.len() != data.n() {
        return Err(Error::InvalidArgument(
            "one prediction per row is required".into(),
        ));
    }
    match spec.constraint {
        ConstraintKind::Ate | ConstraintKind::Nde => Err(Error::Unsupported(
            "average-effect plug-ins need counterfactual predictions".into(),
        )),
        ConstraintKind::GeneralWeighted => {
            let kappa: &Kappa = spec.kappa.as_ref().ok_or(Error::InvalidArgument(
                "weighted constraint needs a weight function".into(),
            ))?;
            let mut s = 0.0;
            for (i, &p) in predictions.iter().enumerate() {
                s += kappa.eval(eta, &data.point(i))? * p;
            }
            Ok(vec![s / data.n() as f64])
        }
        _ => Ok(build_plans(spec, eta, data)?
            .iter()
            .map(|plan| {
                plan.points
                    .iter()
                    .map(|e| e.coef * plan.transform.apply(predictions[e.row], e.y))
                    .sum()
            })
            .collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MapKind {
    Linear,
    UnitRoot,
    CaseReweight,
    CasesControls,
}

/// Precomputed plug-in along the path of a (risk, constraint) pair.
#[derive(Debug, Clone)]
pub(crate) struct PathTable {
    pub psi0: Vec<f64>,
    pub weight: Vec<f64>,
    pub weight2: Vec<f64>,
    pub coef: Vec<f64>,
    pub coef2: Vec<f64>,
    pub y: Vec<f64>,
    pub transform: Transform,
    pub transform2: Transform,
    pub map: MapKind,
}

impl PathTable {
    pub fn build(spec: &ConstraintSpec, eta: &NuisanceSet, data: &Dataset) -> Result<Self> {
        let plans = build_plans(spec, eta, data)?;
        let plan = &plans[0];
        let map = match (spec.constraint, spec.risk) {
            (ConstraintKind::EqualizedRiskCases, _) => MapKind::CaseReweight,
            (ConstraintKind::EqualizedRiskCasesAndControls, _) => MapKind::CasesControls,
            (ConstraintKind::EqualizedRiskOverallMse, _) => {
                return Err(Error::Unsupported(
                    "overall-MSE has no multiplier path to tabulate".into(),
                ))
            }
            (_, RiskKind::MeanSquaredError) => MapKind::Linear,
            (_, RiskKind::CrossEntropy) => MapKind::UnitRoot,
        };
        let mut t = PathTable {
            psi0: Vec::with_capacity(plan.points.len()),
            weight: Vec::with_capacity(plan.points.len()),
            weight2: Vec::new(),
            coef: plan.points.iter().map(|e| e.coef).collect(),
            coef2: plans
                .get(1)
                .map(|p| p.points.iter().map(|e| e.coef).collect())
                .unwrap_or_default(),
            y: plan.points.iter().map(|e| e.y).collect(),
            transform: plan.transform,
            transform2: plans
                .get(1)
                .map(|p| p.transform)
                .unwrap_or(Transform::Identity),
            map,
        };
        for e in &plan.points {
            let z = e.point(data);
            t.psi0.push(eta.psi(&z));
            t.weight.push(match map {
                MapKind::Linear | MapKind::UnitRoot => linear_weight(spec, eta, &z)?,
                MapKind::CaseReweight | MapKind::CasesControls => case_weight(eta, z.x),
            });
            if map == MapKind::CasesControls {
                t.weight2.push(control_weight(eta, z.x));
            }
        }
        Ok(t)
    }

    #[inline]
    fn value(&self, k: usize, l: f64) -> Result<f64> {
        Ok(match self.map {
            MapKind::Linear => linear_shift(self.psi0[k], self.weight[k], l),
            MapKind::UnitRoot => unit_root(self.psi0[k], self.weight[k], l)?,
            MapKind::CaseReweight => case_reweight(self.psi0[k], self.weight[k], l),
            MapKind::CasesControls => {
                cases_controls(self.psi0[k], self.weight[k], self.weight2[k], l, 0.0)
            }
        })
    }

    /// Plug-in constraint at multiplier `l`.
    pub fn theta(&self, l: f64) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..self.psi0.len() {
            if self.coef[k] != 0.0 {
                s += self.coef[k] * self.transform.apply(self.value(k, l)?, self.y[k]);
            }
        }
        Ok(s)
    }

    /// Both plug-ins of the cases-and-controls pair at `(l1, l2)`.
    pub fn theta2(&self, l1: f64, l2: f64) -> [f64; 2] {
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..self.psi0.len() {
            let q = cases_controls(self.psi0[k], self.weight[k], self.weight2[k], l1, l2);
            a += self.coef[k] * self.transform.apply(q, 0.0);
            b += self.coef2[k] * self.transform2.apply(q, 0.0);
        }
        [a, b]
    }

    /// `sum coef * weight`: minus twice the slope of the squared-error path.
    pub fn linear_curvature(&self) -> f64 {
        self.coef.iter().zip(&self.weight).map(|(c, w)| c * w).sum()
    }
}
