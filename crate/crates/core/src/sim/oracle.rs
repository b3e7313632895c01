//! Population evaluation against a large sample with known laws.
//!
//! The covariates are Monte Carlo draws; the attribute, mediator and
//! outcome are integrated exactly with the true conditional laws at every
//! draw. Constraints use the true nuisances in the functional, so the
//! quantity measured is the constraint itself, not an estimate of it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{Dgp, OUTCOME_VARIANCE};
use super::scenario::ScenarioId;
use crate::data::{empirical_marginal, Dataset, Point};
use crate::error::{Error, Result};
use crate::nuisance::{KnownFn, KnownNuisances, Link, NuisanceSet};
use crate::paths::{case_weight, er_cases_range, FairPredictor, Predictor};
use crate::problem::{ConstraintKind, ConstraintMode, ConstraintSpec, RiskKind};
use crate::solver::path_at;

/// Default oracle size.
pub const DEFAULT_ORACLE_SIZE: usize = 100_000;
/// Smallest accepted oracle size.
pub const MIN_ORACLE_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub risk: f64,
    pub risk_se: f64,
    pub constraint: f64,
    pub constraint_se: f64,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    pub scenario: ScenarioId,
    dgp: Dgp,
    data: Dataset,
    truth: Arc<NuisanceSet>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

impl Oracle {
    pub fn new(scenario: ScenarioId, n_oracle: usize, seed: u64) -> Result<Self> {
        if n_oracle < MIN_ORACLE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "oracle needs at least {MIN_ORACLE_SIZE} rows"
            )));
        }
        let dgp = scenario.dgp();
        let data = dgp.sample(n_oracle, seed);
        let truth = Arc::new(true_nuisances(scenario, &data));
        Ok(Self {
            scenario,
            dgp,
            data,
            truth,
        })
    }

    /// True nuisances of the scenario's problem.
    pub fn truth(&self) -> &Arc<NuisanceSet> {
        &self.truth
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn uses_mediator(&self) -> bool {
        self.truth.psi_uses_mediator
    }

    fn levels(&self) -> &'static [f64] {
        if self.dgp.has_mediator() {
            &[0.0, 1.0]
        } else {
            &[0.0]
        }
    }

    fn gamma(&self, m: f64, x: f64, w: &[f64]) -> f64 {
        if !self.dgp.has_mediator() {
            return 1.0;
        }
        let g = self.dgp.gamma1(x, w);
        if m >= 0.5 {
            g
        } else {
            1.0 - g
        }
    }

    fn at<'a>(&self, x: f64, m: f64, w: &'a [f64]) -> Point<'a> {
        Point::new(x, self.uses_mediator().then_some(m), w)
    }

    fn row_risk(&self, predictor: &dyn Predictor, w: &[f64]) -> Result<f64> {
        let mut r = 0.0;
        for x in [0.0, 1.0] {
            let px = 1.0 - x + (2.0 * x - 1.0) * self.dgp.pi1(w);
            if self.dgp.binary_outcome() {
                let q = predictor.predict(&Point::new(x, None, w))?;
                let p0 = self.dgp.outcome_mean(x, 0.0, w);
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::DomainError { value: q });
                }
                r += px * (-p0 * q.ln() - (1.0 - p0) * (1.0 - q).ln());
                continue;
            }
            let mut fixed = None;
            for &m in self.levels() {
                let pred = match fixed {
                    Some(v) => v,
                    None => predictor.predict(&self.at(x, m, w))?,
                };
                if !self.uses_mediator() {
                    fixed = Some(pred);
                }
                let e = self.dgp.outcome_mean(x, m, w) - pred;
                r += px * self.gamma(m, x, w) * (OUTCOME_VARIANCE + e * e);
            }
        }
        Ok(r)
    }

    fn row_constraint(&self, predictor: &dyn Predictor, w: &[f64]) -> Result<f64> {
        Ok(match self.scenario.constraint() {
            ConstraintKind::Ate => {
                predictor.predict(&Point::new(1.0, None, w))?
                    - predictor.predict(&Point::new(0.0, None, w))?
            }
            ConstraintKind::Nde => {
                let mut s = 0.0;
                for m in [0.0, 1.0] {
                    let d = predictor.predict(&Point::new(1.0, Some(m), w))?
                        - predictor.predict(&Point::new(0.0, Some(m), w))?;
                    s += self.gamma(m, 0.0, w) * d;
                }
                s
            }
            ConstraintKind::EqualizedRiskCases => {
                let mut s = 0.0;
                for x in [0.0, 1.0] {
                    let px = 1.0 - x + (2.0 * x - 1.0) * self.dgp.pi1(w);
                    let q = predictor.predict(&Point::new(x, None, w))?;
                    s += px
                        * self.dgp.outcome_mean(x, 0.0, w)
                        * case_weight(&self.truth, x)
                        * -q.ln();
                }
                s
            }
            other => return Err(Error::Unsupported(format!("no oracle for {other:?}"))),
        })
    }

    /// True risk and constraint of `predictor` with Monte Carlo standard
    /// errors over the covariate draws.
    pub fn evaluate(&self, predictor: &dyn Predictor) -> Result<OracleValues> {
        let rows: Vec<(f64, f64)> = (0..self.data.n())
            .into_par_iter()
            .map(|i| {
                let w = self.data.w(i);
                Ok((
                    self.row_risk(predictor, w)?,
                    self.row_constraint(predictor, w)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (risk, risk_se) = mean_se(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
        let (constraint, constraint_se) = mean_se(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        Ok(OracleValues {
            risk,
            risk_se,
            constraint,
            constraint_se,
        })
    }

    /// True constraint of `predictor` only.
    pub fn constraint(&self, predictor: &dyn Predictor) -> Result<f64> {
        let s: f64 = (0..self.data.n())
            .into_par_iter()
            .map(|i| self.row_constraint(predictor, self.data.w(i)))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        Ok(s / self.data.n() as f64)
    }

    /// The true constrained optimum: the scenario's path under the true
    /// nuisances at the multiplier whose true constraint meets `spec`.
    pub fn optimal(&self, spec: &ConstraintSpec) -> Result<FairPredictor> {
        let origin = path_at(spec, &self.truth, 0.0)?;
        let theta0 = self.constraint(&origin)?;
        let target = match spec.mode {
            ConstraintMode::Equality => 0.0,
            ConstraintMode::InequalityAbsBound(c) if theta0.abs() <= c => return Ok(origin),
            ConstraintMode::InequalityAbsBound(c) => theta0.signum() * c,
        };
        let lambda = if spec.risk == RiskKind::MeanSquaredError
            && matches!(spec.constraint, ConstraintKind::Ate | ConstraintKind::Nde)
        {
            // The constraint is affine in the multiplier along these paths.
            let one = self.constraint(&path_at(spec, &self.truth, 1.0)?)?;
            (target - theta0) / (one - theta0)
        } else {
            self.bisect(spec, target, theta0)?
        };
        path_at(spec, &self.truth, lambda)
    }

    fn bisect(&self, spec: &ConstraintSpec, target: f64, theta0: f64) -> Result<f64> {
        let f = |l: f64| -> Result<f64> {
            Ok(self.constraint(&path_at(spec, &self.truth, l)?)? - target)
        };
        let (lo, hi) = if spec.constraint == ConstraintKind::EqualizedRiskCases {
            let (a, b) = er_cases_range(&self.truth);
            let d = 1e-6 * (b - a);
            (a + d, b - d)
        } else {
            (-64.0, 64.0)
        };
        let (fl, fh) = (f(lo)?, f(hi)?);
        if fl.signum() == fh.signum() {
            return Err(Error::NoSignChange {
                lo,
                hi,
                best: fl.abs().min(fh.abs()),
            });
        }
        let (mut a, mut b) = if (theta0 - target).signum() == fl.signum() {
            (0.0, hi)
        } else {
            (lo, 0.0)
        };
        let mut fa = f(a)?;
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// True nuisances of the scenario's problem over the oracle covariates.
fn true_nuisances(scenario: ScenarioId, data: &Dataset) -> NuisanceSet {
    let dgp = scenario.dgp();
    let nde = scenario.constraint() == ConstraintKind::Nde;
    let mut schema = data.schema();
    if !nde {
        schema.mediator = None;
    }
    let psi = if nde {
        KnownFn::new(move |z: &Point| dgp.outcome_mean(z.x, z.m.unwrap_or(0.0), z.w))
    } else {
        KnownFn::new(move |z: &Point| dgp.outcome_mean_xw(z.x, z.w))
    };
    let mut p = [0.0; 2];
    let mut cases = [0.0; 2];
    for i in 0..data.n() {
        let w = data.w(i);
        let pi1 = dgp.pi1(w);
        p[1] += pi1;
        p[0] += 1.0 - pi1;
        if dgp.binary_outcome() {
            cases[1] += pi1 * dgp.outcome_mean(1.0, 0.0, w);
            cases[0] += (1.0 - pi1) * dgp.outcome_mean(0.0, 0.0, w);
        }
    }
    let p1 = [cases[0] / p[0], cases[1] / p[1]];
    let n = data.n() as f64;
    NuisanceSet::from_known(KnownNuisances {
        schema,
        psi,
        psi_uses_mediator: nde,
        link: if dgp.binary_outcome() {
            Link::Logit
        } else {
            Link::Identity
        },
        pi1: KnownFn::new(move |z: &Point| dgp.pi1(z.w)),
        gamma1: dgp
            .has_mediator()
            .then(|| KnownFn::new(move |z: &Point| dgp.gamma1(z.x, z.w))),
        sigma2: None,
        p: [p[0] / n, p[1] / n],
        p1,
        p_controls: [1.0 - p1[0], 1.0 - p1[1]],
        marginal_w: Some(empirical_marginal(data)),
    })
}

/// True risk and constraint of `predictor` on a fresh oracle sample.
pub fn oracle_evaluate(
    scenario: ScenarioId,
    predictor: &dyn Predictor,
    n_oracle: usize,
    seed: u64,
) -> Result<OracleValues> {
    Oracle::new(scenario, n_oracle, seed)?.evaluate(predictor)
}
