//! L1-penalized linear and logistic regression by cyclic coordinate descent,
//! with the penalty chosen by K-fold cross-validation.
//!
//! Objective on standardized features (mean 0, population variance 1):
//! identity link `(1/2n)|y - b0 - Xb|^2 + pen * |b|_1`; logit link
//! `-(1/n) loglik + pen * |b|_1`, handled by proximal Newton (a weighted
//! least-squares coordinate descent inside each Newton step). The intercept is
//! never penalized. Cross-validation scores held-out squared error on the
//! response scale for both links.

use rayon::prelude::*;

use super::model::{
    check_binary_targets, clip_probability, expit, logit, Design, FitDiagnostics, LearnerKind,
    Link, RegressionModel,
};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Smallest penalty as a fraction of the largest.
pub const PENALTY_RATIO: f64 = 1e-3;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_PENALTIES: usize = 100;

const CD_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;
const MAX_NEWTON: usize = 200;
const MIN_WEIGHT: f64 = 1e-5;

/// Fit over the penalty grid and select by cross-validation.
pub fn fit_lasso_cv(
    features: &Design,
    targets: &[f64],
    link: Link,
    folds: usize,
    n_penalties: usize,
    seed: u64,
) -> Result<RegressionModel> {
    features.check_targets(targets)?;
    if link == Link::Logit {
        check_binary_targets(targets)?;
    }
    if folds < 2 || n_penalties < 2 {
        return Err(Error::InvalidArgument(
            "lasso needs folds >= 2 and n_penalties >= 2".into(),
        ));
    }
    let n = features.rows();
    if folds > n {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds on {n} rows would leave a fold empty"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = Problem::new(features, targets, &all, link);
    let grid = penalty_grid(full.penalty_max(), n_penalties);
    if grid[0] == 0.0 {
        let model = full.fit_path(&grid[..1])?.pop().expect("one penalty");
        return Ok(full.to_model(&model, grid[0]));
    }

    let mut order = all.clone();
    CounterRng::new(seed)
        .substream("lasso-folds")
        .shuffle(&mut order);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let prob = Problem::new(features, targets, &train, link);
            let fits = prob.fit_path(&grid)?;
            Ok(fits
                .iter()
                .map(|fit| {
                    let model = prob.to_model(fit, 0.0);
                    test.iter()
                        .map(|&i| {
                            let row: Vec<f64> = features.matrix.row(i).iter().copied().collect();
                            let e = targets[i] - model.predict(&row, 0.0);
                            e * e
                        })
                        .sum::<f64>()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut cv = vec![0.0; grid.len()];
    for fold in &per_fold {
        for (c, e) in cv.iter_mut().zip(fold) {
            *c += e;
        }
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if cv[k] < cv[best] {
            best = k;
        }
    }
    let fits = full.fit_path(&grid[..=best])?;
    Ok(full.to_model(fits.last().expect("non-empty path"), grid[best]))
}

/// Fit at each penalty in `penalties` (should be decreasing for warm starts).
pub fn fit_lasso_path(
    features: &Design,
    targets: &[f64],
    link: Link,
    penalties: &[f64],
) -> Result<Vec<RegressionModel>> {
    features.check_targets(targets)?;
    if link == Link::Logit {
        check_binary_targets(targets)?;
    }
    let all: Vec<usize> = (0..features.rows()).collect();
    let prob = Problem::new(features, targets, &all, link);
    let fits = prob.fit_path(penalties)?;
    Ok(fits
        .iter()
        .zip(penalties)
        .map(|(f, &pen)| prob.to_model(f, pen))
        .collect())
}

/// Smallest penalty at which every coefficient is zero.
pub fn penalty_max(features: &Design, targets: &[f64], link: Link) -> f64 {
    let all: Vec<usize> = (0..features.rows()).collect();
    Problem::new(features, targets, &all, link).penalty_max()
}

/// `n` log-spaced penalties from `top` down to `top * PENALTY_RATIO`.
pub fn penalty_grid(top: f64, n: usize) -> Vec<f64> {
    if top <= 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| top * PENALTY_RATIO.powf(k as f64 / (n - 1) as f64))
        .collect()
}

struct Problem<'a> {
    link: Link,
    kind: LearnerKind,
    names: &'a [String],
    /// Standardized columns restricted to the fitting rows.
    cols: Vec<Vec<f64>>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    y: Vec<f64>,
    n: usize,
}

struct Fit {
    intercept: f64,
    beta: Vec<f64>,
    diag: FitDiagnostics,
}

impl<'a> Problem<'a> {
    fn new(features: &'a Design, targets: &[f64], rows: &[usize], link: Link) -> Self {
        let n = rows.len();
        let k = features.cols();
        let mut cols = Vec::with_capacity(k);
        let mut mean = Vec::with_capacity(k);
        let mut sd = Vec::with_capacity(k);
        for j in 0..k {
            let c: Vec<f64> = rows.iter().map(|&i| features.matrix[(i, j)]).collect();
            let mu = c.iter().sum::<f64>() / n as f64;
            let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            cols.push(if s > 0.0 {
                c.iter().map(|v| (v - mu) / s).collect()
            } else {
                vec![0.0; n]
            });
            mean.push(mu);
            sd.push(s);
        }
        let kind = match link {
            Link::Identity => LearnerKind::LassoLinear,
            Link::Logit => LearnerKind::LassoLogistic,
        };
        Self {
            link,
            kind,
            names: &features.names,
            cols,
            mean,
            sd,
            y: rows.iter().map(|&i| targets[i]).collect(),
            n,
        }
    }

    fn ybar(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n as f64
    }

    fn penalty_max(&self) -> f64 {
        let ybar = self.ybar();
        self.cols
            .iter()
            .map(|c| {
                (c.iter()
                    .zip(&self.y)
                    .map(|(a, y)| a * (y - ybar))
                    .sum::<f64>()
                    / self.n as f64)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    fn null_intercept(&self) -> f64 {
        match self.link {
            Link::Identity => self.ybar(),
            Link::Logit => logit(clip_probability(self.ybar(), 1e-6)),
        }
    }

    fn fit_path(&self, penalties: &[f64]) -> Result<Vec<Fit>> {
        let k = self.cols.len();
        let mut intercept = self.null_intercept();
        let mut beta = vec![0.0; k];
        let mut out = Vec::with_capacity(penalties.len());
        for &pen in penalties {
            let diag = match self.link {
                Link::Identity => self.cd_gaussian(pen, &mut beta),
                Link::Logit => self.cd_logistic(pen, &mut intercept, &mut beta),
            };
            out.push(Fit {
                intercept,
                beta: beta.clone(),
                diag,
            });
        }
        Ok(out)
    }

    fn cd_gaussian(&self, pen: f64, beta: &mut [f64]) -> FitDiagnostics {
        let n = self.n as f64;
        let ybar = self.ybar();
        let mut r: Vec<f64> = self.y.iter().map(|y| y - ybar).collect();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                for (ri, x) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= x * b;
                }
            }
        }
        let mut sweeps = 0;
        let k = beta.len();
        let sweep = |beta: &mut [f64], active_only: bool, r: &mut Vec<f64>| -> f64 {
            let mut max_change: f64 = 0.0;
            for j in 0..k {
                if self.sd[j] == 0.0 || (active_only && beta[j] == 0.0) {
                    continue;
                }
                let x = &self.cols[j];
                let rho = x.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>() / n + beta[j];
                let new = soft_threshold(rho, pen);
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (ri, xi) in r.iter_mut().zip(x) {
                        *ri -= xi * delta;
                    }
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            max_change
        };
        let mut converged = false;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            if sweep(beta, false, &mut r) < CD_TOL {
                converged = true;
                break;
            }
            while sweeps < MAX_SWEEPS {
                sweeps += 1;
                if sweep(beta, true, &mut r) < CD_TOL {
                    break;
                }
            }
        }
        FitDiagnostics {
            iterations: sweeps,
            converged,
            separation: false,
            penalty: Some(pen),
        }
    }

    fn cd_logistic(&self, pen: f64, intercept: &mut f64, beta: &mut [f64]) -> FitDiagnostics {
        let n = self.n as f64;
        let k = beta.len();
        let mut eta = vec![0.0; self.n];
        let mut total_sweeps = 0;
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            for (i, e) in eta.iter_mut().enumerate() {
                *e = *intercept + (0..k).map(|j| self.cols[j][i] * beta[j]).sum::<f64>();
            }
            let mut w = vec![0.0; self.n];
            let mut r = vec![0.0; self.n];
            for i in 0..self.n {
                let p = expit(eta[i]);
                w[i] = (p * (1.0 - p)).max(MIN_WEIGHT);
                r[i] = (self.y[i] - p) / w[i];
            }
            let v: Vec<f64> = (0..k)
                .map(|j| {
                    self.cols[j]
                        .iter()
                        .zip(&w)
                        .map(|(x, wi)| wi * x * x)
                        .sum::<f64>()
                        / n
                })
                .collect();
            let wsum: f64 = w.iter().sum();
            let start_b0 = *intercept;
            let start_beta = beta.to_vec();

            let mut sweep = |beta: &mut [f64], b0: &mut f64, active_only: bool| -> f64 {
                let mut max_change: f64 = 0.0;
                for j in 0..k {
                    if self.sd[j] == 0.0 || (active_only && beta[j] == 0.0) {
                        continue;
                    }
                    let x = &self.cols[j];
                    let rho = x
                        .iter()
                        .zip(&r)
                        .zip(&w)
                        .map(|((a, b), c)| a * b * c)
                        .sum::<f64>()
                        / n
                        + v[j] * beta[j];
                    let new = soft_threshold(rho, pen) / v[j];
                    let delta = new - beta[j];
                    if delta != 0.0 {
                        for (ri, xi) in r.iter_mut().zip(x) {
                            *ri -= xi * delta;
                        }
                        beta[j] = new;
                        max_change = max_change.max(delta.abs());
                    }
                }
                let db = r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
                if db != 0.0 {
                    for ri in r.iter_mut() {
                        *ri -= db;
                    }
                    *b0 += db;
                    max_change = max_change.max(db.abs());
                }
                max_change
            };
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweep(beta, intercept, false) < CD_TOL || sweeps >= MAX_SWEEPS {
                    break;
                }
                while sweeps < MAX_SWEEPS {
                    sweeps += 1;
                    if sweep(beta, intercept, true) < CD_TOL {
                        break;
                    }
                }
            }
            total_sweeps += sweeps;
            let change = beta
                .iter()
                .zip(&start_beta)
                .map(|(a, b)| (a - b).abs())
                .fold((*intercept - start_b0).abs(), f64::max);
            if change < 1e-9 {
                converged = true;
                break;
            }
        }
        FitDiagnostics {
            iterations: total_sweeps,
            converged,
            separation: false,
            penalty: Some(pen),
        }
    }

    fn to_model(&self, fit: &Fit, pen: f64) -> RegressionModel {
        let coefficients: Vec<f64> = fit
            .beta
            .iter()
            .zip(&self.sd)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        let base = match self.link {
            Link::Identity => self.ybar(),
            Link::Logit => fit.intercept,
        };
        let intercept = base
            - coefficients
                .iter()
                .zip(&self.mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        let mut diagnostics = fit.diag.clone();
        diagnostics.penalty = Some(pen);
        RegressionModel {
            kind: self.kind,
            link: self.link,
            intercept,
            coefficients,
            feature_names: self.names.to_vec(),
            diagnostics,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_design(n: usize, k: usize, seed: u64) -> Design {
        let mut r = CounterRng::new(seed);
        let names = (0..k).map(|j| format!("w{}", j + 1)).collect();
        Design::from_fn(names, n, |_, out| {
            for v in out.iter_mut() {
                *v = r.normal();
            }
        })
    }

    /// Subgradient optimality on the standardized scale.
    fn kkt_violation(d: &Design, y: &[f64], link: Link, m: &RegressionModel) -> f64 {
        let n = d.rows();
        let pen = m.diagnostics.penalty.unwrap();
        let resid: Vec<f64> = (0..n).map(|i| y[i] - m.predict(&d.row(i), 0.0)).collect();
        let _ = link;
        let mut worst: f64 = 0.0;
        for j in 0..d.cols() {
            let c: Vec<f64> = d.matrix.column(j).iter().copied().collect();
            let mu = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
            let g = c
                .iter()
                .zip(&resid)
                .map(|(v, e)| (v - mu) / sd * e)
                .sum::<f64>()
                / n as f64;
            let b = m.coefficients[j];
            let v = if b == 0.0 {
                (g.abs() - pen).max(0.0)
            } else {
                (g - pen * b.signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn top_penalty_zeroes_everything() {
        let d = random_design(100, 5, 1);
        let y: Vec<f64> = (0..100).map(|i| d.matrix[(i, 0)] * 2.0 + 1.0).collect();
        let top = penalty_max(&d, &y, Link::Identity);
        let m = fit_lasso_path(&d, &y, Link::Identity, &[top])
            .unwrap()
            .pop()
            .unwrap();
        assert!(m.coefficients.iter().all(|&b| b == 0.0));
        assert!((m.intercept - y.iter().sum::<f64>() / 100.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_recovery() {
        let d = random_design(200, 21, 2);
        let y: Vec<f64> = (0..200).map(|i| 3.0 * d.matrix[(i, 0)]).collect();
        let m = fit_lasso_cv(&d, &y, Link::Identity, 10, 100, 7).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 0.2);
        let zeros = m.coefficients[1..].iter().filter(|&&b| b == 0.0).count();
        assert!(zeros >= 15, "only {zeros} spurious coefficients are zero");
        assert!(kkt_violation(&d, &y, Link::Identity, &m) < 1e-4);
    }

    #[test]
    fn logistic_kkt_and_determinism() {
        let d = random_design(400, 8, 3);
        let mut r = CounterRng::new(9);
        let y: Vec<f64> = (0..400)
            .map(|i| r.bernoulli(expit(0.5 + d.matrix[(i, 0)] - 0.5 * d.matrix[(i, 1)])))
            .collect();
        let m = fit_lasso_cv(&d, &y, Link::Logit, 5, 30, 4).unwrap();
        assert!(kkt_violation(&d, &y, Link::Logit, &m) < 1e-4);
        assert!(m.coefficients[0] > 0.5 && m.coefficients[1] < -0.2);
        let again = fit_lasso_cv(&d, &y, Link::Logit, 5, 30, 4).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn too_many_folds() {
        let d = random_design(9, 2, 4);
        assert!(fit_lasso_cv(&d, &[0.0; 9], Link::Identity, 10, 100, 1).is_err());
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = penalty_grid(2.0, 3);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((g[2] - 2e-3).abs() < 1e-15);
        assert!((g[1] - 2.0 * 1e-1_f64.powf(1.5)).abs() < 1e-12);
    }
}
