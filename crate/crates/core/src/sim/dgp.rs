//! Data-generating processes with known laws.
//!
//! Every variable is drawn from its own named substream of the seed, so
//! adding a column or changing `n` never shifts the draws of another
//! variable.

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnRole, Dataset};
use crate::nuisance::expit;
use crate::rng::CounterRng;

/// Outcome variance of the continuous scenarios.
pub const OUTCOME_VARIANCE: f64 = 4.0;

/// Which part of the base misspecification scenario is replaced by a
/// nonlinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisspecVariant {
    Base,
    Pi,
    Psi,
    Gamma,
}

impl MisspecVariant {
    pub fn name(self) -> &'static str {
        match self {
            MisspecVariant::Base => "base",
            MisspecVariant::Pi => "pi",
            MisspecVariant::Psi => "psi",
            MisspecVariant::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "base" => MisspecVariant::Base,
            "pi" => MisspecVariant::Pi,
            "psi" => MisspecVariant::Psi,
            "gamma" => MisspecVariant::Gamma,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// Six mixed covariates, binary mediator, Gaussian outcome.
    Main,
    /// Same covariates and attribute law, Bernoulli outcome, no mediator.
    Binary,
    /// `p` independent standard normal covariates.
    HighDim { p: usize },
    /// Main-terms base scenario or one of its nonlinear modifications;
    /// `null` removes the attribute and mediator from the outcome mean.
    Misspec { variant: MisspecVariant, null: bool },
}

impl Dgp {
    pub fn n_covariates(&self) -> usize {
        match self {
            Dgp::HighDim { p } => *p,
            _ => 6,
        }
    }

    pub fn has_mediator(&self) -> bool {
        !matches!(self, Dgp::Binary)
    }

    pub fn binary_outcome(&self) -> bool {
        matches!(self, Dgp::Binary)
    }

    /// `P(X = 1 | w)`.
    pub fn pi1(&self, w: &[f64]) -> f64 {
        match self {
            Dgp::Main | Dgp::Binary => expit(w[0] - w[1] / 3.0 - w[5] / 10.0),
            Dgp::HighDim { .. } => expit(w[0] - w[1] / 2.0 + w[2] / 3.0 - w[3] / 4.0 + w[4] / 5.0),
            Dgp::Misspec {
                variant: MisspecVariant::Pi,
                ..
            } => expit(w[0] * w[1] + w[3] * w[3] / 50.0 - w[2] / 2.0 + w[5] / 10.0),
            Dgp::Misspec { .. } => expit(w[0] - w[2] / 2.0 + w[5] / 10.0),
        }
    }

    /// `P(M = 1 | x, w)`; zero for the mediator-free process.
    pub fn gamma1(&self, x: f64, w: &[f64]) -> f64 {
        match self {
            Dgp::Binary => 0.0,
            Dgp::Main => expit(-1.0 - x - w[0] + w[1] / 2.0 - w[4] / 2.0),
            // The fourth covariate enters with coefficient -4/4 = -1.
            Dgp::HighDim { .. } => expit(-x + w[0] - w[1] / 2.0 + w[2] / 3.0 - w[3] + w[4] / 5.0),
            Dgp::Misspec {
                variant: MisspecVariant::Gamma,
                ..
            } => expit(-1.0 - x - w[0] * w[1] + w[3] * w[3] / 50.0 + w[1] / 2.0 - w[4] / 2.0),
            Dgp::Misspec { .. } => expit(-1.0 - x - w[0] + w[1] / 2.0 - w[4] / 5.0),
        }
    }

    /// `E(Y | x, m, w)`, or `P(Y = 1 | x, w)` for the binary outcome.
    pub fn outcome_mean(&self, x: f64, m: f64, w: &[f64]) -> f64 {
        match self {
            Dgp::Main => -x + 2.0 * m + 2.0 * w[0] - w[2] - w[3] + 2.0 * w[4],
            Dgp::Binary => expit(-x / 2.0 - w[0] - w[1] - w[2] + 2.0 * w[4]),
            Dgp::HighDim { .. } => x + m + w[0] - w[1] / 2.0 + w[2] / 3.0 - w[3] / 4.0 + w[4] / 5.0,
            Dgp::Misspec { variant, null } => {
                let psi_mis = *variant == MisspecVariant::Psi;
                match (psi_mis, null) {
                    (false, false) => -2.0 * x - m + 2.0 * w[0] - w[2] - w[3] + 2.0 * w[4],
                    (true, false) => {
                        -2.0 * x - m + 2.0 * w[0] * w[1] + w[3] * w[3] / 2.0 - w[2] - w[3]
                            + 2.0 * w[4]
                    }
                    (false, true) => 2.0 * w[0] - w[2] - w[3] + 2.0 * w[4],
                    (true, true) => 2.0 * w[0] * w[1] + w[3] * w[3] / 2.0 - w[2] - w[3] + w[4],
                }
            }
        }
    }

    /// `E(Y | x, w)` with the mediator integrated out.
    pub fn outcome_mean_xw(&self, x: f64, w: &[f64]) -> f64 {
        if !self.has_mediator() {
            return self.outcome_mean(x, 0.0, w);
        }
        let g = self.gamma1(x, w);
        g * self.outcome_mean(x, 1.0, w) + (1.0 - g) * self.outcome_mean(x, 0.0, w)
    }

    fn sample_covariates(&self, rng: &CounterRng, n: usize) -> Vec<Vec<f64>> {
        match self {
            Dgp::HighDim { p } => (0..*p)
                .map(|j| {
                    let mut r = rng.substream(&format!("w{}", j + 1));
                    (0..n).map(|_| r.normal()).collect()
                })
                .collect(),
            _ => {
                let stream = |k: usize| rng.substream(&format!("w{k}"));
                let (mut r1, mut r2, mut r3) = (stream(1), stream(2), stream(3));
                let (mut r4, mut r5, mut r6) = (stream(4), stream(5), stream(6));
                let w1: Vec<f64> = (0..n).map(|_| r1.bernoulli(0.25)).collect();
                let w2: Vec<f64> = w1.iter().map(|&a| r2.bernoulli(expit(a))).collect();
                let w3: Vec<f64> = w1
                    .iter()
                    .zip(&w2)
                    .map(|(&a, &b)| r3.bernoulli(expit(-b + a)))
                    .collect();
                let w4 = (0..n).map(|_| r4.normal()).collect();
                let w5 = (0..n).map(|_| r5.uniform()).collect();
                let w6 = (0..n).map(|_| r6.exponential()).collect();
                vec![w1, w2, w3, w4, w5, w6]
            }
        }
    }

    /// Draw `n` rows with columns `w1.., x, [m], y`.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let rng = CounterRng::new(seed);
        let cov = self.sample_covariates(&rng, n);
        let p = cov.len();
        let mut w = vec![0.0; p];
        let row = |i: usize, w: &mut Vec<f64>| {
            for j in 0..p {
                w[j] = cov[j][i];
            }
        };
        let (mut rx, mut rm, mut ry) = (rng.substream("x"), rng.substream("m"), rng.substream("y"));
        let (mut xs, mut ms, mut ys) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for i in 0..n {
            row(i, &mut w);
            let x = rx.bernoulli(self.pi1(&w));
            let m = if self.has_mediator() {
                rm.bernoulli(self.gamma1(x, &w))
            } else {
                0.0
            };
            let mean = self.outcome_mean(x, m, &w);
            let y = if self.binary_outcome() {
                ry.bernoulli(mean)
            } else {
                mean + OUTCOME_VARIANCE.sqrt() * ry.normal()
            };
            xs.push(x);
            ms.push(m);
            ys.push(y);
        }
        let mut columns: Vec<Column> = cov
            .into_iter()
            .enumerate()
            .map(|(j, v)| Column::new(format!("w{}", j + 1), ColumnRole::Covariate, v))
            .collect();
        columns.push(Column::new("x", ColumnRole::Sensitive, xs));
        if self.has_mediator() {
            columns.push(Column::new("m", ColumnRole::Mediator, ms));
        }
        columns.push(Column::new("y", ColumnRole::Outcome, ys));
        Dataset::new(columns).expect("generated columns are well formed")
    }
}

/// Main process: mixed covariates, binary mediator, Gaussian outcome with
/// variance 4.
pub fn dgp_main(n: usize, seed: u64) -> Dataset {
    Dgp::Main.sample(n, seed)
}

/// Binary outcome sharing the covariate and attribute law of [`dgp_main`].
pub fn dgp_binary(n: usize, seed: u64) -> Dataset {
    Dgp::Binary.sample(n, seed)
}

/// `p` standard normal covariates of which five are active.
pub fn dgp_highdim(n: usize, p: usize, seed: u64) -> Dataset {
    Dgp::HighDim { p }.sample(n, seed)
}

pub fn dgp_misspec(variant: MisspecVariant, null_constraint: bool, n: usize, seed: u64) -> Dataset {
    Dgp::Misspec {
        variant,
        null: null_constraint,
    }
    .sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn main_marginals() {
        let d = dgp_main(100_000, 11);
        let w1: Vec<f64> = (0..d.n()).map(|i| d.w(i)[0]).collect();
        let w5: Vec<f64> = (0..d.n()).map(|i| d.w(i)[4]).collect();
        assert!((mean(&w1) - 0.25).abs() < 0.005);
        assert!((mean(&w5) - 0.5).abs() < 0.005);
        assert!(d.has_mediator());
    }

    #[test]
    fn binary_outcome_values() {
        let d = dgp_binary(500, 3);
        assert!(d.y().unwrap().iter().all(|&y| y == 0.0 || y == 1.0));
        assert!(!d.has_mediator());
    }

    #[test]
    fn highdim_shape() {
        let d = dgp_highdim(100, 100, 1);
        assert_eq!(d.n(), 100);
        assert_eq!(d.columns().len(), 103);
    }

    #[test]
    fn seeded_determinism() {
        let a = dgp_misspec(MisspecVariant::Psi, false, 200, 9);
        let b = dgp_misspec(MisspecVariant::Psi, false, 200, 9);
        assert_eq!(a.y().unwrap(), b.y().unwrap());
        let c = dgp_misspec(MisspecVariant::Psi, false, 200, 10);
        assert_ne!(a.y().unwrap(), c.y().unwrap());
    }

    #[test]
    fn prefix_stability() {
        let a = dgp_main(50, 4);
        let b = dgp_main(80, 4);
        assert_eq!(a.x(), &b.x()[..50]);
    }

    #[test]
    fn null_mean_ignores_attribute() {
        let d = Dgp::Misspec {
            variant: MisspecVariant::Psi,
            null: true,
        };
        let w = [1.0, 1.0, 0.0, 0.5, 0.2, 1.0];
        assert_eq!(d.outcome_mean(0.0, 0.0, &w), d.outcome_mean(1.0, 1.0, &w));
    }
}
