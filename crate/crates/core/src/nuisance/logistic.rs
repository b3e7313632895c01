use nalgebra::{DMatrix, DVector};

use super::model::{
    check_binary_targets, expit, Design, FitDiagnostics, LearnerKind, Link, RegressionModel,
};
use crate::error::{Error, Result};

/// Any coefficient beyond this magnitude is treated as divergence.
pub const SEPARATION_THRESHOLD: f64 = 30.0;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Logistic regression with intercept by iteratively reweighted least
/// squares (Newton's method on the Bernoulli log-likelihood).
///
/// Perfect or quasi separation is not an error: the fit stops as soon as a
/// coefficient exceeds [`SEPARATION_THRESHOLD`] and sets
/// `diagnostics.separation`.
pub fn fit_logistic_irls(
    features: &Design,
    targets: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<RegressionModel> {
    features.check_targets(targets)?;
    check_binary_targets(targets)?;
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let x = features.with_intercept();
    let (n, k) = x.shape();
    let y = DVector::from_column_slice(targets);
    let mut beta = DVector::zeros(k);
    let mut diag = FitDiagnostics::default();

    for iter in 1..=max_iter {
        diag.iterations = iter;
        let eta = &x * &beta;
        let p = eta.map(expit);
        let w = p.map(|v| (v * (1.0 - v)).max(1e-12));
        let mut xw = x.clone();
        for i in 0..n {
            xw.row_mut(i).scale_mut(w[i]);
        }
        let h: DMatrix<f64> = x.transpose() * &xw;
        let g = x.transpose() * (&y - &p);
        let delta = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => h
                .lu()
                .solve(&g)
                .ok_or(Error::RankDeficient { pivot: 0.0 })?,
        };
        beta += &delta;
        if beta
            .iter()
            .any(|b| b.abs() > SEPARATION_THRESHOLD || !b.is_finite())
        {
            diag.separation = true;
            for b in beta.iter_mut() {
                if !b.is_finite() {
                    *b = b.signum() * SEPARATION_THRESHOLD;
                }
            }
            break;
        }
        if delta.amax() < tol {
            diag.converged = true;
            break;
        }
    }
    if !diag.converged && !diag.separation {
        return Err(Error::NonConvergence(max_iter));
    }
    Ok(RegressionModel {
        kind: LearnerKind::LogisticIrls,
        link: Link::Logit,
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        feature_names: features.names.clone(),
        diagnostics: diag,
    })
}
