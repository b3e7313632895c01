//! Euler steppers that trace a path from the first-order condition alone.
//!
//! Differentiating `dL/dpsi (psi_lambda) = 0` in the multiplier gives
//! `d psi / d lambda = -D(psi) / L''(psi)` at every evaluation point, where
//! `D` is the constraint gradient and `L''` the second derivative of the
//! pointwise Lagrangian. Integrating this from the unconstrained fit
//! reproduces the closed-form path up to the step error, and needs no path
//! formula. The two-multiplier version fills a lattice over both
//! multipliers of the cases-and-controls pair.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Point};
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::paths::{
    build_plans, case_weight, cases_controls, cases_controls_range, control_weight, er_cases_range,
    gradient_cases_controls, gradient_cases_controls_dpsi, gradient_constraint,
    gradient_constraint_dpsi, hessian_risk, TabulatedPredictor,
};
use crate::problem::{ConstraintKind, ConstraintSpec, RiskKind};

/// Default multiplier step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Number of recorded samples per direction.
const SAMPLES: usize = 256;
const SINGULAR: f64 = 1e-12;
const EDGE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursiveSample {
    pub lambda: f64,
    pub theta: f64,
    pub psi: Vec<f64>,
}

/// Traced path: recorded samples in increasing multiplier order.
#[derive(Debug, Clone)]
pub struct RecursivePath {
    /// `(row, x, m)` of every evaluation point.
    pub points: Vec<(usize, f64, Option<f64>)>,
    pub samples: Vec<RecursiveSample>,
    /// Step whose plug-in constraint was closest to zero.
    pub best: RecursiveSample,
    pub steps: usize,
}

impl RecursivePath {
    fn table(&self, psi: &[f64]) -> TabulatedPredictor {
        let rows = self.points.iter().map(|p| p.0).max().map_or(0, |r| r + 1);
        let mut values = vec![f64::NAN; rows * 4];
        for (&(row, x, m), &v) in self.points.iter().zip(psi) {
            values[TabulatedPredictor::index(row, x, m)] = v;
        }
        TabulatedPredictor { values }
    }

    /// Tabulated predictor of recorded sample `k`, defined on the
    /// evaluation points.
    pub fn predictor(&self, k: usize) -> TabulatedPredictor {
        self.table(&self.samples[k].psi)
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.samples[k].theta
    }

    /// The step closest to satisfying the constraint.
    pub fn argmin_constraint(&self) -> (f64, TabulatedPredictor) {
        (self.best.lambda, self.table(&self.best.psi))
    }
}

struct Stepper<'a> {
    spec: &'a ConstraintSpec,
    eta: &'a NuisanceSet,
    data: &'a Dataset,
    points: Vec<(usize, f64, Option<f64>)>,
    coef: Vec<f64>,
    /// Plug-in sums `-log psi` (equalized case risk) instead of `psi`.
    negative_log: bool,
    psi0: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn point(&self, k: usize) -> Point<'a> {
        let (row, x, m) = self.points[k];
        Point {
            row: Some(row),
            x,
            m,
            w: self.data.w(row),
        }
    }

    fn theta(&self, psi: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..psi.len() {
            if self.coef[k] == 0.0 {
                continue;
            }
            let v = if self.negative_log {
                -psi[k].ln()
            } else {
                psi[k]
            };
            s += self.coef[k] * v;
        }
        s
    }

    fn derivative(&self, k: usize, psi: f64, lambda: f64) -> Result<f64> {
        let z = self.point(k);
        let d = gradient_constraint(self.spec, self.eta, &z, psi)?;
        let curv = hessian_risk(self.spec.risk, psi, self.psi0[k])?
            + lambda * gradient_constraint_dpsi(self.spec, self.eta, &z, psi)?;
        if curv.abs() < SINGULAR {
            return Err(Error::StepSingularity {
                point: k,
                value: curv,
            });
        }
        Ok(-d / curv)
    }

    fn trace(&self, step: f64, end: f64) -> Result<(Vec<RecursiveSample>, RecursiveSample, usize)> {
        let n_steps = (end.abs() / step).floor() as usize;
        let h = step * end.signum();
        let stride = n_steps.div_ceil(SAMPLES).max(1);
        let mut psi = self.psi0.clone();
        let mut lambda = 0.0;
        let mut best = RecursiveSample {
            lambda,
            theta: self.theta(&psi),
            psi: psi.clone(),
        };
        let mut samples = Vec::new();
        for s in 1..=n_steps {
            for k in 0..psi.len() {
                psi[k] += h * self.derivative(k, psi[k], lambda)?;
            }
            lambda = s as f64 * h;
            let theta = self.theta(&psi);
            if theta.abs() < best.theta.abs() {
                best = RecursiveSample {
                    lambda,
                    theta,
                    psi: psi.clone(),
                };
            }
            if s % stride == 0 || s == n_steps {
                samples.push(RecursiveSample {
                    lambda,
                    theta,
                    psi: psi.clone(),
                });
            }
        }
        Ok((samples, best, n_steps))
    }
}

/// Euler-integrate the path of `spec` from the unconstrained fit over
/// `[-lambda_max, lambda_max]` (clipped to the admissible interval).
pub fn solve_recursive_path(
    spec: &ConstraintSpec,
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    step: f64,
    lambda_max: f64,
) -> Result<RecursivePath> {
    spec.validate()?;
    if !(step > 0.0) || !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(
            "step and extent must be positive".into(),
        ));
    }
    if matches!(
        spec.constraint,
        ConstraintKind::EqualizedRiskOverallMse | ConstraintKind::EqualizedRiskCasesAndControls
    ) {
        return Err(Error::Unsupported(format!(
            "{:?} has no single-multiplier stepper",
            spec.constraint
        )));
    }
    let plan = build_plans(spec, eta, data)?.swap_remove(0);
    let (mut lo, mut hi) = (-lambda_max, lambda_max);
    if spec.constraint == ConstraintKind::EqualizedRiskCases {
        let (a, b) = er_cases_range(eta);
        let d = EDGE * (b - a);
        lo = lo.max(a + d);
        hi = hi.min(b - d);
    }
    let negative_log = spec.constraint == ConstraintKind::EqualizedRiskCases;
    let points: Vec<_> = plan.points.iter().map(|e| (e.row, e.x, e.m)).collect();
    let stepper = Stepper {
        spec,
        eta,
        data,
        psi0: plan
            .points
            .iter()
            .map(|e| eta.psi(&e.point(data)))
            .collect(),
        coef: plan.points.iter().map(|e| e.coef).collect(),
        negative_log,
        points,
    };
    let (mut down, best_down, n_down) = stepper.trace(step, lo)?;
    let (up, best_up, n_up) = stepper.trace(step, hi)?;
    down.reverse();
    let origin = RecursiveSample {
        lambda: 0.0,
        theta: stepper.theta(&stepper.psi0),
        psi: stepper.psi0.clone(),
    };
    down.push(origin);
    down.extend(up);
    let best = if best_down.theta.abs() <= best_up.theta.abs() {
        best_down
    } else {
        best_up
    };
    Ok(RecursivePath {
        points: stepper.points,
        samples: down,
        best,
        steps: n_down + n_up,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Cases,
    Controls,
}

/// Lattice over both multipliers of the cases-and-controls pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursiveLattice {
    pub step: f64,
    /// Number of nodes per axis; node `(i, j)` sits at `(i * step, j * step)`.
    pub size: usize,
    /// `[cases, controls]` plug-ins per node, row-major in `i`.
    pub theta: Vec<[f64; 2]>,
    /// Largest distance to the closed-form path over all nodes and points.
    pub max_error: f64,
}

impl RecursiveLattice {
    /// Node with the smallest residual norm and its multipliers.
    pub fn argmin(&self) -> ([f64; 2], [f64; 2]) {
        let (idx, t) = self
            .theta
            .iter()
            .enumerate()
            .min_by(|a, b| norm2(*a.1).total_cmp(&norm2(*b.1)))
            .map(|(i, t)| (i, *t))
            .unwrap_or((0, [f64::NAN; 2]));
        let (i, j) = (idx / self.size, idx % self.size);
        ([i as f64 * self.step, j as f64 * self.step], t)
    }
}

fn norm2(t: [f64; 2]) -> f64 {
    t[0] * t[0] + t[1] * t[1]
}

struct PairStepper<'a> {
    eta: &'a NuisanceSet,
    data: &'a Dataset,
    rows: Vec<(usize, f64)>,
    psi0: Vec<f64>,
    coef: [Vec<f64>; 2],
}

/// Per-point derivatives `(r1, r2, r12)` of the pair path.
struct Rates {
    r: [f64; 2],
    r12: f64,
}

impl<'a> PairStepper<'a> {
    fn new(eta: &'a NuisanceSet, data: &'a Dataset) -> Result<Self> {
        let spec = ConstraintSpec::new(
            ConstraintKind::EqualizedRiskCasesAndControls,
            RiskKind::CrossEntropy,
        );
        let plans = build_plans(&spec, eta, data)?;
        Ok(Self {
            eta,
            data,
            rows: plans[0].points.iter().map(|e| (e.row, e.x)).collect(),
            psi0: plans[0]
                .points
                .iter()
                .map(|e| eta.psi(&e.point(data)))
                .collect(),
            coef: [
                plans[0].points.iter().map(|e| e.coef).collect(),
                plans[1].points.iter().map(|e| e.coef).collect(),
            ],
        })
    }

    fn rates(&self, k: usize, q: f64, l: [f64; 2]) -> Result<Rates> {
        let (row, x) = self.rows[k];
        let z = Point {
            row: Some(row),
            x,
            m: None,
            w: self.data.w(row),
        };
        let p0 = self.psi0[k];
        let d = gradient_cases_controls(self.eta, &z, q)?;
        let dd = gradient_cases_controls_dpsi(self.eta, &z, q)?;
        let curv = hessian_risk(RiskKind::CrossEntropy, q, p0)? + l[0] * dd[0] + l[1] * dd[1];
        if curv.abs() < SINGULAR {
            return Err(Error::StepSingularity {
                point: k,
                value: curv,
            });
        }
        // Third derivative of the pointwise Lagrangian in psi.
        let c1 = case_weight(self.eta, x);
        let c0 = control_weight(self.eta, x);
        let (a, b) = (q * q * q, (1.0 - q).powi(3));
        let curv_dpsi = 2.0 * (1.0 - p0) / b - 2.0 * p0 / a - 2.0 * l[0] * c1 * p0 / a
            + 2.0 * l[1] * c0 * (1.0 - p0) / b;
        let r = [-d[0] / curv, -d[1] / curv];
        let dr1_dpsi = -dd[0] / curv + d[0] * curv_dpsi / (curv * curv);
        let r12 = dr1_dpsi * r[1] + d[0] * dd[1] / (curv * curv);
        Ok(Rates { r, r12 })
    }

    fn take(&self, psi: &mut [f64], l: [f64; 2], axis: Axis, h: f64) -> Result<()> {
        let a = axis as usize;
        for k in 0..psi.len() {
            psi[k] += h * self.rates(k, psi[k], l)?.r[a];
        }
        Ok(())
    }

    fn diagonal(&self, psi: &[f64], l: [f64; 2], h: f64) -> Result<Vec<f64>> {
        let mut out = psi.to_vec();
        for k in 0..psi.len() {
            let r = self.rates(k, psi[k], l)?;
            out[k] += h * (r.r[0] + r.r[1]) + h * h * r.r12;
        }
        Ok(out)
    }

    fn theta(&self, psi: &[f64]) -> [f64; 2] {
        let mut t = [0.0; 2];
        for (k, &q) in psi.iter().enumerate() {
            t[0] -= self.coef[0][k] * q.ln();
            t[1] -= self.coef[1][k] * (1.0 - q).ln();
        }
        t
    }

    fn error(&self, psi: &[f64], l: [f64; 2]) -> f64 {
        psi.iter()
            .enumerate()
            .map(|(k, &q)| {
                let x = self.rows[k].1;
                let exact = cases_controls(
                    self.psi0[k],
                    case_weight(self.eta, x),
                    control_weight(self.eta, x),
                    l[0],
                    l[1],
                );
                (q - exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_extent(eta: &NuisanceSet, step: f64, extent: f64) -> Result<usize> {
    if !(step > 0.0) || !(extent >= 0.0) {
        return Err(Error::InvalidArgument(
            "step must be positive and extent non-negative".into(),
        ));
    }
    let [r1, r2] = cases_controls_range(eta);
    if !(extent < r1.1 && extent < r2.1) {
        return Err(Error::LambdaOutOfRange {
            lambda: extent,
            lo: r1.0.max(r2.0),
            hi: r1.1.min(r2.1),
        });
    }
    Ok((extent / step).floor() as usize + 1)
}

/// Fill the lattice `[0, extent]^2` with step `step`.
///
/// Axis nodes come from one-multiplier Euler steps; interior nodes from a
/// diagonal step off the node below-left using both first derivatives and
/// the mixed second derivative.
pub fn solve_recursive_2d(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    step: f64,
    extent: f64,
) -> Result<RecursiveLattice> {
    let size = check_extent(eta, step, extent)?;
    let st = PairStepper::new(eta, data)?;
    let at = |i: usize, j: usize| [i as f64 * step, j as f64 * step];
    let mut theta = vec![[0.0; 2]; size * size];
    let mut max_error: f64 = 0.0;
    // Row i = 0 along the controls axis.
    let mut prev: Vec<Vec<f64>> = Vec::with_capacity(size);
    let mut psi = st.psi0.clone();
    for j in 0..size {
        if j > 0 {
            st.take(&mut psi, at(0, j - 1), Axis::Controls, step)?;
        }
        prev.push(psi.clone());
    }
    for (j, p) in prev.iter().enumerate() {
        theta[j] = st.theta(p);
        max_error = max_error.max(st.error(p, at(0, j)));
    }
    for i in 1..size {
        let mut row: Vec<Vec<f64>> = Vec::with_capacity(size);
        let mut first = prev[0].clone();
        st.take(&mut first, at(i - 1, 0), Axis::Cases, step)?;
        row.push(first);
        for j in 1..size {
            row.push(st.diagonal(&prev[j - 1], at(i - 1, j - 1), step)?);
        }
        for (j, p) in row.iter().enumerate() {
            theta[i * size + j] = st.theta(p);
            max_error = max_error.max(st.error(p, at(i, j)));
        }
        prev = row;
    }
    Ok(RecursiveLattice {
        step,
        size,
        theta,
        max_error,
    })
}

/// Walk from the unconstrained fit by single-axis Euler steps in the given
/// order and return the predictions at the observed rows.
pub fn walk_recursive_2d(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    step: f64,
    moves: &[Axis],
) -> Result<Vec<f64>> {
    let counts = [Axis::Cases, Axis::Controls].map(|a| moves.iter().filter(|&&m| m == a).count());
    check_extent(eta, step, step * counts[0].max(counts[1]) as f64)?;
    let st = PairStepper::new(eta, data)?;
    let mut psi = st.psi0.clone();
    let mut l = [0.0; 2];
    for &axis in moves {
        st.take(&mut psi, l, axis, step)?;
        l[axis as usize] += step;
    }
    Ok(psi)
}
