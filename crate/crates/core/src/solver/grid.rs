//! One-dimensional multiplier search: bracket, dense grid, bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceSet;
use crate::paths::{er_cases_range, PathTable};
use crate::problem::{ConstraintKind, ConstraintSpec};

/// Maximum number of bracket doublings for unbounded multipliers.
pub const MAX_DOUBLINGS: u32 = 10;
/// Points sampled to confirm monotonicity on the bracket.
pub const MONOTONE_SAMPLES: usize = 101;
/// Relative shrink of open admissible intervals.
const EDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Search bracket for `spec`: configured bounds, the admissible interval
/// for the equalized case risk, or a symmetric interval doubled until the
/// shifted constraint changes sign.
pub(crate) fn bracket(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    f: &dyn Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    if let Some(b) = spec.grid.bounds {
        return Ok(b);
    }
    if spec.constraint == ConstraintKind::EqualizedRiskCases {
        let (lo, hi) = er_cases_range(eta);
        let d = EDGE * (hi - lo);
        return Ok((lo + d, hi - d));
    }
    let mut b = 1.0;
    let mut best = f64::INFINITY;
    for _ in 0..=MAX_DOUBLINGS {
        let (a, c) = (f(-b)?, f(b)?);
        best = best.min(a.abs()).min(c.abs());
        if a.signum() != c.signum() || a == 0.0 || c == 0.0 {
            return Ok((-b, b));
        }
        b *= 2.0;
    }
    b /= 2.0;
    Err(Error::NoSignChange {
        lo: -b,
        hi: b,
        best,
    })
}

/// Check that `f` is monotone on `[lo, hi]` from evenly spaced samples.
pub(crate) fn check_monotone(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<()> {
    let vals: Vec<f64> = (0..MONOTONE_SAMPLES)
        .map(|k| f(lo + (hi - lo) * k as f64 / (MONOTONE_SAMPLES - 1) as f64))
        .collect::<Result<_>>()?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let up = vals.windows(2).all(|p| p[1] - p[0] >= -tol);
    let down = vals.windows(2).all(|p| p[1] - p[0] <= tol);
    if up || down {
        Ok(())
    } else {
        Err(Error::NonMonotone { lo, hi })
    }
}

/// Grid search plus bisection for `Theta_n(psi_lambda) = target`.
pub fn solve_grid(
    spec: &ConstraintSpec,
    eta: &NuisanceSet,
    data: &Dataset,
    target: f64,
) -> Result<GridOutcome> {
    spec.grid.validate()?;
    let table = PathTable::build(spec, eta, data)?;
    let f = |l: f64| -> Result<f64> { Ok(table.theta(l)? - target) };
    if f(0.0)? == 0.0 {
        return Ok(GridOutcome {
            lambda: 0.0,
            bracket: (0.0, 0.0),
            iterations: 1,
        });
    }
    let (lo, hi) = bracket(spec, eta, &f)?;
    check_monotone(&f, lo, hi)?;

    let n = spec.grid.n_points;
    let at = |j: usize| lo + (hi - lo) * j as f64 / (n - 1) as f64;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| f(at(j)))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for j in 1..n {
        let (a, b) = (values[j].abs(), values[best].abs());
        if a < b || (a == b && at(j).abs() < at(best).abs()) {
            best = j;
        }
    }
    let mut iterations = n;
    let g_best = values[best];
    if g_best == 0.0 || spec.grid.refine_bisection_iters == 0 {
        return Ok(GridOutcome {
            lambda: at(best),
            bracket: (lo, hi),
            iterations,
        });
    }
    let opposite = |j: usize| values[j].signum() != g_best.signum();
    let neighbour = [best.checked_sub(1), (best + 1 < n).then_some(best + 1)]
        .into_iter()
        .flatten()
        .filter(|&j| opposite(j))
        .min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let Some(other) = neighbour else {
        if values.iter().all(|v| v.signum() == g_best.signum()) {
            return Err(Error::NoSignChange {
                lo,
                hi,
                best: g_best.abs(),
            });
        }
        return Ok(GridOutcome {
            lambda: at(best),
            bracket: (lo, hi),
            iterations,
        });
    };
    let (mut a, mut fa) = (at(best), g_best);
    let (mut b, mut fb) = (at(other), values[other]);
    for _ in 0..spec.grid.refine_bisection_iters {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid)?;
        iterations += 1;
        if fm == 0.0 {
            a = mid;
            fa = 0.0;
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    let lambda = if fa.abs() <= fb.abs() { a } else { b };
    Ok(GridOutcome {
        lambda,
        bracket: (lo, hi),
        iterations,
    })
}
