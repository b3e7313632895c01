use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clipping for every probability output.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LinearOls,
    LogisticIrls,
    LassoLinear,
    LassoLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Logit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// IRLS stopped early because a coefficient exceeded the divergence
    /// threshold; predictions remain usable after clipping.
    pub separation: bool,
    /// Penalty selected by cross-validation (lasso learners only).
    pub penalty: Option<f64>,
}

/// A fitted generalized linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: LearnerKind,
    pub link: Link,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

impl RegressionModel {
    pub fn linear_predictor(&self, features: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(features)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    /// Prediction on the response scale. Logit-link outputs are clipped to
    /// `[eps, 1 - eps]`.
    pub fn predict(&self, features: &[f64], eps: f64) -> f64 {
        self.respond(self.linear_predictor(features), eps)
    }

    pub fn respond(&self, eta: f64, eps: f64) -> f64 {
        match self.link {
            Link::Identity => eta,
            Link::Logit => clip_probability(expit(eta), eps),
        }
    }
}

pub fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `min(max(p, eps), 1 - eps)`.
pub fn clip_probability(p: f64, eps: f64) -> f64 {
    p.max(eps).min(1.0 - eps)
}

/// Named feature matrix handed to the learners.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl Design {
    /// Build an `n x names.len()` design by filling each row with `fill`.
    pub fn from_fn(names: Vec<String>, n: usize, mut fill: impl FnMut(usize, &mut [f64])) -> Self {
        let k = names.len();
        let mut buf = vec![0.0; k];
        let mut matrix = DMatrix::zeros(n, k);
        for i in 0..n {
            fill(i, &mut buf);
            for j in 0..k {
                matrix[(i, j)] = buf[j];
            }
        }
        Self { names, matrix }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    pub(crate) fn check_targets(&self, targets: &[f64]) -> Result<()> {
        if targets.len() != self.rows() {
            return Err(Error::InvalidArgument(format!(
                "design has {} rows but {} targets were given",
                self.rows(),
                targets.len()
            )));
        }
        Ok(())
    }

    /// Design with a leading column of ones.
    pub(crate) fn with_intercept(&self) -> DMatrix<f64> {
        let (n, k) = self.matrix.shape();
        DMatrix::from_fn(
            n,
            k + 1,
            |i, j| if j == 0 { 1.0 } else { self.matrix[(i, j - 1)] },
        )
    }
}

pub(crate) fn check_binary_targets(targets: &[f64]) -> Result<()> {
    match targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
        Some(v) => Err(Error::InvalidArgument(format!(
            "binary targets required, found {v}"
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping() {
        assert_eq!(clip_probability(0.5, 1e-6), 0.5);
        assert_eq!(clip_probability(0.0, 1e-6), 1e-6);
        assert_eq!(clip_probability(1.2, 1e-6), 1.0 - 1e-6);
    }

    #[test]
    fn expit_is_stable() {
        assert_eq!(expit(0.0), 0.5);
        assert!(expit(-800.0) >= 0.0 && expit(800.0) <= 1.0);
        assert!((logit(expit(1.3)) - 1.3).abs() < 1e-12);
    }
}
