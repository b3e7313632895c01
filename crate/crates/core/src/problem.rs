//! What is being solved: risk, constraint functional, equality or bound, and
//! solver settings.

use serde::{Deserialize, Serialize};

use crate::data::Point;
use crate::error::{Error, Result};
use crate::nuisance::{KnownFn, NuisanceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    MeanSquaredError,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Average total effect of the sensitive attribute on predictions.
    Ate,
    /// Natural direct effect through the non-mediated pathway.
    Nde,
    /// Equal cross-entropy risk between groups among cases (`y = 1`).
    EqualizedRiskCases,
    /// Equal mean squared error between groups.
    EqualizedRiskOverallMse,
    /// Equal cross-entropy risk among cases and among controls.
    EqualizedRiskCasesAndControls,
    /// `E[kappa(Z) psi(Z)] = 0` for a user weight `kappa`.
    GeneralWeighted,
}

impl ConstraintKind {
    pub fn requires_mediator(self) -> bool {
        self == Self::Nde
    }
}

/// Equality `Theta = 0` or the two-sided bound `|Theta| <= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    Equality,
    InequalityAbsBound(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    pub bounds: Option<(f64, f64)>,
    pub refine_bisection_iters: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 100_000,
            bounds: None,
            refine_bisection_iters: 60,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::InvalidArgument(
                "grid needs at least 3 points".into(),
            ));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "invalid grid bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// How the case probability in the equalized-risk weights is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseProbability {
    /// Within-group mean of the fitted outcome model, `P(Y = 1 | X = x)`.
    #[default]
    Conditional,
    /// Conditional mean times the group share, `P(X = x, Y = 1)`.
    Joint,
}

/// Weight function for the general linear constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    /// `(2x - 1) / pi(x | w)`: reproduces the average-effect constraint.
    AteWeight,
    /// Average-effect weight times `gamma(m | 0, w) / gamma(m | x, w)`.
    NdeWeight,
    /// `2x - 1`.
    SensitiveContrast,
    Constant(f64),
    /// `intercept + sum coef * column`, columns named by the data schema.
    Linear {
        intercept: f64,
        terms: Vec<(String, f64)>,
    },
    #[serde(skip)]
    Custom(KnownFn),
}

impl Kappa {
    pub fn eval(&self, eta: &NuisanceSet, z: &Point) -> Result<f64> {
        Ok(match self {
            Kappa::AteWeight => (2.0 * z.x - 1.0) / eta.pi(z.x, z.w),
            Kappa::NdeWeight => {
                let m = z.m.ok_or(Error::MissingMediator)?;
                (2.0 * z.x - 1.0) / eta.pi(z.x, z.w) * eta.gamma(m, 0.0, z.w)?
                    / eta.gamma(m, z.x, z.w)?
            }
            Kappa::SensitiveContrast => 2.0 * z.x - 1.0,
            Kappa::Constant(c) => *c,
            Kappa::Linear { intercept, terms } => {
                let mut v = *intercept;
                for (name, coef) in terms {
                    v += coef * eta.schema_value(name, z)?;
                }
                v
            }
            Kappa::Custom(f) => f.call(z),
        })
    }

    /// Whether the weight varies with the mediator.
    pub fn uses_mediator(&self, eta: &NuisanceSet) -> bool {
        match self {
            Kappa::NdeWeight | Kappa::Custom(_) => true,
            Kappa::Linear { terms, .. } => terms
                .iter()
                .any(|(n, _)| eta.schema.mediator.as_deref() == Some(n.as_str())),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub constraint: ConstraintKind,
    pub risk: RiskKind,
    pub mode: ConstraintMode,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kappa: Option<Kappa>,
    /// Below this magnitude the overall-MSE constraint counts as satisfied.
    #[serde(default = "default_satisfied_tol")]
    pub satisfied_tol: f64,
}

fn default_satisfied_tol() -> f64 {
    1e-6
}

impl ConstraintSpec {
    pub fn new(constraint: ConstraintKind, risk: RiskKind) -> Self {
        Self {
            constraint,
            risk,
            mode: ConstraintMode::Equality,
            grid: GridConfig::default(),
            kappa: None,
            satisfied_tol: default_satisfied_tol(),
        }
    }

    pub fn weighted(kappa: Kappa, risk: RiskKind) -> Self {
        Self {
            kappa: Some(kappa),
            ..Self::new(ConstraintKind::GeneralWeighted, risk)
        }
    }

    pub fn with_mode(mut self, mode: ConstraintMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_grid(mut self, grid: GridConfig) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use ConstraintKind::*;
        match (self.constraint, self.risk) {
            (EqualizedRiskCases | EqualizedRiskCasesAndControls, RiskKind::MeanSquaredError) => {
                return Err(Error::Unsupported(format!(
                    "{:?} requires cross-entropy risk",
                    self.constraint
                )))
            }
            (EqualizedRiskOverallMse, RiskKind::CrossEntropy) => {
                return Err(Error::Unsupported(
                    "equalized overall risk is implemented for squared error only".into(),
                ))
            }
            _ => {}
        }
        if self.constraint == GeneralWeighted && self.kappa.is_none() {
            return Err(Error::InvalidArgument(
                "weighted constraint needs a weight function".into(),
            ));
        }
        if let ConstraintMode::InequalityAbsBound(c) = self.mode {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bound must be a finite c >= 0, got {c}"
                )));
            }
        }
        self.grid.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rules() {
        use ConstraintKind::*;
        use RiskKind::*;
        assert!(ConstraintSpec::new(Ate, MeanSquaredError)
            .validate()
            .is_ok());
        assert!(ConstraintSpec::new(EqualizedRiskCases, MeanSquaredError)
            .validate()
            .is_err());
        assert!(ConstraintSpec::new(EqualizedRiskOverallMse, CrossEntropy)
            .validate()
            .is_err());
        assert!(ConstraintSpec::new(GeneralWeighted, CrossEntropy)
            .validate()
            .is_err());
        assert!(ConstraintSpec::new(Ate, CrossEntropy)
            .with_mode(ConstraintMode::InequalityAbsBound(-1.0))
            .validate()
            .is_err());
        let bad_grid = GridConfig {
            n_points: 2,
            ..Default::default()
        };
        assert!(ConstraintSpec::new(Ate, CrossEntropy)
            .with_grid(bad_grid)
            .validate()
            .is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = ConstraintSpec::weighted(
            Kappa::Linear {
                intercept: 0.5,
                terms: vec![("w1".into(), 2.0)],
            },
            RiskKind::MeanSquaredError,
        )
        .with_mode(ConstraintMode::InequalityAbsBound(0.25));
        let text = serde_json::to_string(&s).unwrap();
        let back: ConstraintSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
