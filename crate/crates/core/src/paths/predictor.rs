use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gradients::{case_weight, control_weight, linear_weight};
use super::pointwise::{case_reweight, cases_controls, linear_shift, unit_root};
use crate::data::{Dataset, Point};
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceDoc, NuisanceSet};
use crate::problem::{ConstraintKind, ConstraintSpec, Kappa, RiskKind};

/// Anything that maps an evaluation point to a prediction.
pub trait Predictor: Send + Sync {
    fn predict(&self, z: &Point) -> Result<f64>;
}

/// Wrap a closure as a [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&Point) -> f64 + Send + Sync> Predictor for FnPredictor<F> {
    fn predict(&self, z: &Point) -> Result<f64> {
        Ok((self.0)(z))
    }
}

/// Values stored per `(row, x, m)`; used for paths produced numerically.
#[derive(Debug, Clone)]
pub struct TabulatedPredictor {
    pub(crate) values: Vec<f64>,
}

impl TabulatedPredictor {
    pub(crate) fn index(row: usize, x: f64, m: Option<f64>) -> usize {
        row * 4 + usize::from(x >= 0.5) * 2 + usize::from(m.unwrap_or(0.0) >= 0.5)
    }
}

impl Predictor for TabulatedPredictor {
    fn predict(&self, z: &Point) -> Result<f64> {
        let row = z.row.ok_or_else(|| {
            Error::InvalidArgument("tabulated predictor needs row-indexed points".into())
        })?;
        self.values
            .get(Self::index(row, z.x, z.m))
            .copied()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidArgument(format!("no tabulated value for row {row}")))
    }
}

/// How the multiplier turns the unconstrained fit into the fair predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    /// The closed-form path map of the configured (risk, constraint) pair.
    Path,
    /// Overall-MSE solution: shift the predictions of group `arm` upward by
    /// the pointwise variance gap; the other group is unchanged.
    ShiftArm { arm: u8 },
}

/// Unconstrained fit plus solved multiplier(s) and the path map.
#[derive(Debug, Clone)]
pub struct FairPredictor {
    pub eta: Arc<NuisanceSet>,
    pub spec: ConstraintSpec,
    pub lambda: Vec<f64>,
    pub adjustment: Adjustment,
}

impl FairPredictor {
    /// Path member at `lambda` for a single-multiplier spec, without any
    /// admissibility check.
    pub(crate) fn on_path(eta: Arc<NuisanceSet>, spec: ConstraintSpec, lambda: Vec<f64>) -> Self {
        Self {
            eta,
            spec,
            lambda,
            adjustment: Adjustment::Path,
        }
    }

    /// The unconstrained fit, represented as the path origin.
    pub fn unconstrained(eta: Arc<NuisanceSet>, spec: ConstraintSpec) -> Self {
        let k = if spec.constraint == ConstraintKind::EqualizedRiskCasesAndControls {
            2
        } else {
            1
        };
        Self::on_path(eta, spec, vec![0.0; k])
    }

    pub fn is_origin(&self) -> bool {
        self.adjustment == Adjustment::Path && self.lambda.iter().all(|&l| l == 0.0)
    }

    pub fn to_doc(&self) -> Result<PredictorDoc> {
        if matches!(self.spec.kappa, Some(Kappa::Custom(_))) {
            return Err(Error::Unsupported(
                "custom weight functions cannot be serialized".into(),
            ));
        }
        Ok(PredictorDoc {
            spec: self.spec.clone(),
            lambda: self.lambda.clone(),
            adjustment: self.adjustment,
            nuisances: serde_json::from_value(self.eta.to_json()?)?,
        })
    }

    pub fn from_doc(doc: PredictorDoc) -> Result<Self> {
        let eta = NuisanceSet::from_json(serde_json::to_value(doc.nuisances)?)?;
        Ok(Self {
            eta: Arc::new(eta),
            spec: doc.spec,
            lambda: doc.lambda,
            adjustment: doc.adjustment,
        })
    }

    /// Predictions at the observed rows of `data`.
    pub fn predict_rows(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.n())
            .map(|i| self.predict(&self.observed(data, i)))
            .collect()
    }

    /// Observed point of row `i`, dropping the mediator when the outcome
    /// model does not use it.
    pub fn observed<'a>(&self, data: &'a Dataset, i: usize) -> Point<'a> {
        let z = data.point(i);
        if self.eta.psi_uses_mediator {
            z
        } else {
            z.with_m(None)
        }
    }
}

impl Predictor for FairPredictor {
    fn predict(&self, z: &Point) -> Result<f64> {
        let eta = &*self.eta;
        let psi0 = eta.psi(z);
        if self.is_origin() {
            return Ok(psi0);
        }
        let l = self.lambda[0];
        if let Adjustment::ShiftArm { arm } = self.adjustment {
            return shifted_arm(eta, z, psi0, arm);
        }
        use ConstraintKind::*;
        match (self.spec.constraint, self.spec.risk) {
            (Ate | Nde | GeneralWeighted, RiskKind::MeanSquaredError) => {
                Ok(linear_shift(psi0, linear_weight(&self.spec, eta, z)?, l))
            }
            (Ate | Nde | GeneralWeighted, RiskKind::CrossEntropy) => {
                unit_root(psi0, linear_weight(&self.spec, eta, z)?, l)
            }
            (EqualizedRiskCases, _) => Ok(case_reweight(psi0, case_weight(eta, z.x), l)),
            (EqualizedRiskCasesAndControls, _) => Ok(cases_controls(
                psi0,
                case_weight(eta, z.x),
                control_weight(eta, z.x),
                l,
                self.lambda.get(1).copied().unwrap_or(0.0),
            )),
            (EqualizedRiskOverallMse, _) => Err(Error::Unsupported(
                "overall-MSE predictors are built by path_er_overall_mse".into(),
            )),
        }
    }
}

/// Radicand for shifting group `arm` so its conditional risk matches the
/// other group's.
pub(crate) fn arm_radicand(eta: &NuisanceSet, w: &[f64], arm: u8) -> Result<f64> {
    let a = f64::from(arm);
    let b = 1.0 - a;
    Ok(eta.p(a) / eta.p(b) * eta.pi(b, w) / eta.pi(a, w) * eta.sigma2(b, w)? - eta.sigma2(a, w)?)
}

fn shifted_arm(eta: &NuisanceSet, z: &Point, psi0: f64, arm: u8) -> Result<f64> {
    if (z.x >= 0.5) != (arm == 1) {
        return Ok(psi0);
    }
    let r = arm_radicand(eta, z.w, arm)?;
    if r < -1e-10 {
        return Err(Error::NegativeRadicand {
            row: z.row.unwrap_or(usize::MAX),
            value: r,
        });
    }
    Ok(psi0 + r.max(0.0).sqrt())
}

/// Serialized [`FairPredictor`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorDoc {
    pub spec: ConstraintSpec,
    pub lambda: Vec<f64>,
    pub adjustment: Adjustment,
    pub nuisances: NuisanceDoc,
}
