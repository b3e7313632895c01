//! Two-multiplier search for equal cross-entropy among cases and among
//! controls at once.
//!
//! The pair of plug-ins is driven to its targets by minimizing the sum of
//! squared residuals over the admissible rectangle: a coarse lattice, a few
//! zooming refinements around the best cell, then damped Newton polishing.

use std::sync::Arc;

use rayon::prelude::*;

use super::{SolveMethod, SolveResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::paths::{
    cases_controls_range, estimate_cases_controls, path_cases_controls, second_order_check,
    FairPredictor, PathTable,
};
use crate::problem::{ConstraintKind, ConstraintMode, ConstraintSpec, GridConfig, RiskKind};

/// Largest residual norm accepted as a solution of the pair.
pub const PAIR_TOLERANCE: f64 = 1e-3;
const COARSE: usize = 301;
const FINE: usize = 101;
const REFINEMENTS: usize = 4;
const NEWTON_ITERS: usize = 30;
const EDGE: f64 = 1e-6;

struct Pair {
    table: PathTable,
    target: [f64; 2],
    range: [(f64, f64); 2],
}

impl Pair {
    fn residual(&self, l: [f64; 2]) -> [f64; 2] {
        let t = self.table.theta2(l[0], l[1]);
        [t[0] - self.target[0], t[1] - self.target[1]]
    }

    fn objective(&self, l: [f64; 2]) -> f64 {
        let r = self.residual(l);
        let f = r[0] * r[0] + r[1] * r[1];
        if f.is_finite() {
            f
        } else {
            f64::INFINITY
        }
    }

    fn inside(&self, l: [f64; 2]) -> bool {
        (0..2).all(|j| l[j] > self.range[j].0 && l[j] < self.range[j].1)
    }

    /// Best lattice point on `[lo, hi]` per axis.
    fn lattice(&self, lo: [f64; 2], hi: [f64; 2], k: usize) -> ([f64; 2], f64) {
        let at = |j: usize, i: usize| lo[j] + (hi[j] - lo[j]) * i as f64 / (k - 1) as f64;
        (0..k * k)
            .into_par_iter()
            .map(|idx| {
                let l = [at(0, idx / k), at(1, idx % k)];
                (l, self.objective(l))
            })
            .reduce(
                || ([0.0, 0.0], f64::INFINITY),
                |a, b| {
                    let key = |c: &([f64; 2], f64)| (c.1, norm(c.0), c.0[0], c.0[1]);
                    if key(&b).partial_cmp(&key(&a)) == Some(std::cmp::Ordering::Less) {
                        b
                    } else {
                        a
                    }
                },
            )
    }

    fn newton(&self, mut l: [f64; 2]) -> [f64; 2] {
        let mut f = self.objective(l);
        for _ in 0..NEWTON_ITERS {
            if f < 1e-24 {
                break;
            }
            let r = self.residual(l);
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let h = 1e-7 * (self.range[j].1 - self.range[j].0);
                let mut a = l;
                let mut b = l;
                a[j] -= h;
                b[j] += h;
                if !self.inside(a) || !self.inside(b) {
                    return l;
                }
                let (ra, rb) = (self.residual(a), self.residual(b));
                for i in 0..2 {
                    jac[i][j] = (rb[i] - ra[i]) / (2.0 * h);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 {
                return l;
            }
            let step = [
                (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                (jac[0][0] * r[1] - jac[1][0] * r[0]) / det,
            ];
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-6 {
                let cand = [l[0] - t * step[0], l[1] - t * step[1]];
                if self.inside(cand) {
                    let fc = self.objective(cand);
                    if fc < f {
                        l = cand;
                        f = fc;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        l
    }

    fn search(&self) -> ([f64; 2], f64) {
        if self.objective([0.0, 0.0]) < 1e-20 {
            return ([0.0, 0.0], self.objective([0.0, 0.0]));
        }
        let shrink = |(lo, hi): (f64, f64)| {
            let d = EDGE * (hi - lo);
            (lo + d, hi - d)
        };
        let r = [shrink(self.range[0]), shrink(self.range[1])];
        let lo = [r[0].0, r[1].0];
        let hi = [r[0].1, r[1].1];
        let (mut best, _) = self.lattice(lo, hi, COARSE);
        let mut spacing = [
            (hi[0] - lo[0]) / (COARSE - 1) as f64,
            (hi[1] - lo[1]) / (COARSE - 1) as f64,
        ];
        for _ in 0..REFINEMENTS {
            let a = [
                (best[0] - 2.0 * spacing[0]).max(lo[0]),
                (best[1] - 2.0 * spacing[1]).max(lo[1]),
            ];
            let b = [
                (best[0] + 2.0 * spacing[0]).min(hi[0]),
                (best[1] + 2.0 * spacing[1]).min(hi[1]),
            ];
            best = self.lattice(a, b, FINE).0;
            spacing = [
                (b[0] - a[0]) / (FINE - 1) as f64,
                (b[1] - a[1]) / (FINE - 1) as f64,
            ];
        }
        let best = self.newton(best);
        (best, self.objective(best))
    }
}

fn norm(l: [f64; 2]) -> f64 {
    l[0].abs() + l[1].abs()
}

fn pair_spec(grid: &GridConfig) -> ConstraintSpec {
    ConstraintSpec::new(
        ConstraintKind::EqualizedRiskCasesAndControls,
        RiskKind::CrossEntropy,
    )
    .with_grid(grid.clone())
}

fn finish(
    predictor: FairPredictor,
    data: &Dataset,
    mu_active: bool,
    method: SolveMethod,
) -> Result<(FairPredictor, SolveResult)> {
    let values = estimate_cases_controls(&predictor, &predictor.eta, data)?;
    let report = second_order_check(&predictor, data)?;
    Ok((
        predictor.clone(),
        SolveResult {
            lambda: predictor.lambda.clone(),
            constraint_value: values[0],
            constraint_values: values.to_vec(),
            mu_active,
            iterations: COARSE * COARSE + REFINEMENTS * FINE * FINE,
            method,
            report,
        },
    ))
}

fn solve_pair(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    grid: &GridConfig,
    target: [f64; 2],
    mu_active: bool,
) -> Result<(FairPredictor, SolveResult)> {
    let spec = pair_spec(grid);
    path_cases_controls(eta, 0.0, 0.0)?;
    let pair = Pair {
        table: PathTable::build(&spec, eta, data)?,
        target,
        range: cases_controls_range(eta),
    };
    let (l, f) = pair.search();
    if !(f.sqrt() <= PAIR_TOLERANCE) {
        return Err(Error::NoFeasiblePoint(f.sqrt()));
    }
    let mut p = path_cases_controls(eta, l[0], l[1])?;
    p.spec = spec;
    finish(p, data, mu_active, SolveMethod::PairGrid)
}

/// Solve both equalized-risk equalities (cases and controls).
pub fn solve_cases_controls(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    grid: &GridConfig,
) -> Result<(FairPredictor, SolveResult)> {
    solve_pair(eta, data, grid, [0.0, 0.0], false)
}

/// Solve the (cases, controls) pair with one mode per component.
///
/// At most one component may be a bound `|Theta| <= c`. The bounded
/// component's multiplier is first held at zero while the other constraint
/// is solved; when the bound then holds this is the solution, otherwise
/// the bound binds and both components are solved with the bounded one at
/// `sign(Theta) * c`.
pub fn solve_constraint_system(
    eta: &Arc<NuisanceSet>,
    data: &Dataset,
    grid: &GridConfig,
    modes: &[ConstraintMode],
) -> Result<(FairPredictor, SolveResult)> {
    let inequalities = modes
        .iter()
        .filter(|m| matches!(m, ConstraintMode::InequalityAbsBound(_)))
        .count();
    let equalities = modes.len() - inequalities;
    if modes.len() != 2 || inequalities > 1 {
        return Err(Error::UnsupportedConstraintCount {
            equalities,
            inequalities,
        });
    }
    let Some(bounded) = modes
        .iter()
        .position(|m| matches!(m, ConstraintMode::InequalityAbsBound(_)))
    else {
        return solve_cases_controls(eta, data, grid);
    };
    let ConstraintMode::InequalityAbsBound(c) = modes[bounded] else {
        unreachable!()
    };
    let free = 1 - bounded;
    let spec = pair_spec(grid);
    path_cases_controls(eta, 0.0, 0.0)?;
    let table = PathTable::build(&spec, eta, data)?;
    let range = cases_controls_range(eta)[free];
    let d = EDGE * (range.1 - range.0);
    let lift = |l: f64| if free == 0 { [l, 0.0] } else { [0.0, l] };
    let g = |l: f64| {
        let l2 = lift(l);
        table.theta2(l2[0], l2[1])[free]
    };
    let lambda = bisect_free(&g, range.0 + d, range.1 - d, grid)?;
    let l2 = lift(lambda);
    let bounded_value = table.theta2(l2[0], l2[1])[bounded];
    if bounded_value.abs() <= c {
        let mut p = path_cases_controls(eta, l2[0], l2[1])?;
        p.spec = spec;
        return finish(p, data, false, SolveMethod::PairGrid);
    }
    let mut target = [0.0; 2];
    target[bounded] = bounded_value.signum() * c;
    solve_pair(eta, data, grid, target, true)
}

/// Root of `g` on `(lo, hi)` by grid plus bisection.
fn bisect_free(
    g: &(dyn Fn(f64) -> f64 + Sync),
    lo: f64,
    hi: f64,
    grid: &GridConfig,
) -> Result<f64> {
    if g(0.0) == 0.0 {
        return Ok(0.0);
    }
    let n = grid.n_points.min(20_001);
    let at = |j: usize| lo + (hi - lo) * j as f64 / (n - 1) as f64;
    let values: Vec<f64> = (0..n).into_par_iter().map(|j| g(at(j))).collect();
    let change = (1..n).find(|&j| {
        values[j - 1].is_finite()
            && values[j].is_finite()
            && values[j - 1].signum() != values[j].signum()
    });
    let Some(j) = change else {
        let best = values
            .iter()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, |a, v| a.min(v.abs()));
        return Err(Error::NoSignChange { lo, hi, best });
    };
    let (mut a, mut b, mut fa) = (at(j - 1), at(j), values[j - 1]);
    for _ in 0..grid.refine_bisection_iters.max(60) {
        let m = 0.5 * (a + b);
        let fm = g(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
