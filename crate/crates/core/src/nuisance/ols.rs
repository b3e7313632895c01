use nalgebra::DVector;

use super::model::{Design, FitDiagnostics, LearnerKind, Link, RegressionModel};
use crate::error::{Error, Result};

/// Relative pivot tolerance for rank detection.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares with intercept, solved by Householder QR.
pub fn fit_ols(features: &Design, targets: &[f64]) -> Result<RegressionModel> {
    features.check_targets(targets)?;
    let k = features.cols() + 1;
    if features.rows() < k {
        return Err(Error::InvalidArgument(format!(
            "OLS needs at least {k} rows, got {}",
            features.rows()
        )));
    }
    let x = features.with_intercept();
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let qr = x.qr();
    let r = qr.r();
    for j in 0..k {
        let rel = if norms[j] > 0.0 {
            r[(j, j)].abs() / norms[j]
        } else {
            0.0
        };
        if rel < RANK_TOL {
            return Err(Error::RankDeficient { pivot: rel });
        }
    }
    let mut qty = DVector::from_column_slice(targets);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or(Error::RankDeficient { pivot: 0.0 })?;
    Ok(RegressionModel {
        kind: LearnerKind::LinearOls,
        link: Link::Identity,
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        feature_names: features.names.clone(),
        diagnostics: FitDiagnostics {
            iterations: 1,
            converged: true,
            ..Default::default()
        },
    })
}
