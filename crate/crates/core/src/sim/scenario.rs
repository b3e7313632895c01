//! Named simulation scenarios: one process, one constraint, one learner set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::dgp::{Dgp, MisspecVariant};
use crate::error::{Error, Result};
use crate::nuisance::{LearnerChoice, NuisanceConfig};
use crate::problem::{ConstraintKind, ConstraintSpec, RiskKind};

/// Average-effect constraint of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Effect {
    Ate,
    Nde,
}

impl Effect {
    fn name(self) -> &'static str {
        match self {
            Effect::Ate => "ate",
            Effect::Nde => "nde",
        }
    }

    fn constraint(self) -> ConstraintKind {
        match self {
            Effect::Ate => ConstraintKind::Ate,
            Effect::Nde => ConstraintKind::Nde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    AteMse,
    NdeMse,
    ErCasesCe,
    HighDimAte {
        p: usize,
    },
    HighDimNde {
        p: usize,
    },
    /// `null` selects the variant whose average effects are zero.
    Misspec {
        variant: MisspecVariant,
        effect: Effect,
        null: bool,
    },
}

impl ScenarioId {
    pub fn name(&self) -> String {
        match self {
            ScenarioId::AteMse => "ate-mse".into(),
            ScenarioId::NdeMse => "nde-mse".into(),
            ScenarioId::ErCasesCe => "er-cases-ce".into(),
            ScenarioId::HighDimAte { p } => format!("highdim-ate-p{p}"),
            ScenarioId::HighDimNde { p } => format!("highdim-nde-p{p}"),
            ScenarioId::Misspec {
                variant,
                effect,
                null,
            } => {
                let head = if *null { "null" } else { "misspec" };
                format!("{head}-{}-{}", variant.name(), effect.name())
            }
        }
    }

    /// Every scenario with the covariate dimensions used in the experiments.
    pub fn all() -> Vec<ScenarioId> {
        let mut v = vec![
            ScenarioId::AteMse,
            ScenarioId::NdeMse,
            ScenarioId::ErCasesCe,
        ];
        for p in [10, 50, 100] {
            v.push(ScenarioId::HighDimAte { p });
            v.push(ScenarioId::HighDimNde { p });
        }
        for null in [false, true] {
            for variant in [
                MisspecVariant::Base,
                MisspecVariant::Pi,
                MisspecVariant::Psi,
                MisspecVariant::Gamma,
            ] {
                for effect in [Effect::Ate, Effect::Nde] {
                    v.push(ScenarioId::Misspec {
                        variant,
                        effect,
                        null,
                    });
                }
            }
        }
        v
    }

    pub fn dgp(&self) -> Dgp {
        match *self {
            ScenarioId::AteMse | ScenarioId::NdeMse => Dgp::Main,
            ScenarioId::ErCasesCe => Dgp::Binary,
            ScenarioId::HighDimAte { p } | ScenarioId::HighDimNde { p } => Dgp::HighDim { p },
            ScenarioId::Misspec { variant, null, .. } => Dgp::Misspec { variant, null },
        }
    }

    pub fn constraint(&self) -> ConstraintKind {
        match self {
            ScenarioId::AteMse | ScenarioId::HighDimAte { .. } => ConstraintKind::Ate,
            ScenarioId::NdeMse | ScenarioId::HighDimNde { .. } => ConstraintKind::Nde,
            ScenarioId::ErCasesCe => ConstraintKind::EqualizedRiskCases,
            ScenarioId::Misspec { effect, .. } => effect.constraint(),
        }
    }

    pub fn risk(&self) -> RiskKind {
        match self {
            ScenarioId::ErCasesCe => RiskKind::CrossEntropy,
            _ => RiskKind::MeanSquaredError,
        }
    }

    /// Equality spec of the scenario's constraint.
    pub fn spec(&self) -> ConstraintSpec {
        ConstraintSpec::new(self.constraint(), self.risk())
    }

    /// Learners of the scenario: cross-validated lasso for the
    /// high-dimensional process, main-terms GLMs otherwise.
    pub fn nuisance_config(&self, seed: u64) -> NuisanceConfig {
        let mut c = NuisanceConfig::new(self.constraint(), self.risk());
        c.seed = seed;
        if matches!(
            self,
            ScenarioId::HighDimAte { .. } | ScenarioId::HighDimNde { .. }
        ) {
            c = c.with_learner(LearnerChoice::Lasso);
        }
        c
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown scenario `{s}`"));
        match s {
            "ate-mse" => return Ok(ScenarioId::AteMse),
            "nde-mse" => return Ok(ScenarioId::NdeMse),
            "er-cases-ce" => return Ok(ScenarioId::ErCasesCe),
            _ => {}
        }
        let parts: Vec<&str> = s.split('-').collect();
        match parts.as_slice() {
            ["highdim", effect, dim] => {
                let p: usize = dim
                    .strip_prefix('p')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(bad)?;
                if p < 5 {
                    return Err(Error::InvalidArgument(
                        "high-dimensional scenarios need p >= 5".into(),
                    ));
                }
                match *effect {
                    "ate" => Ok(ScenarioId::HighDimAte { p }),
                    "nde" => Ok(ScenarioId::HighDimNde { p }),
                    _ => Err(bad()),
                }
            }
            [head @ ("misspec" | "null"), variant, effect] => {
                let variant = MisspecVariant::parse(variant).ok_or_else(bad)?;
                let effect = match *effect {
                    "ate" => Effect::Ate,
                    "nde" => Effect::Nde,
                    _ => return Err(bad()),
                };
                Ok(ScenarioId::Misspec {
                    variant,
                    effect,
                    null: *head == "null",
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for ScenarioId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ScenarioId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in ScenarioId::all() {
            assert_eq!(s.name().parse::<ScenarioId>().unwrap(), s);
        }
    }

    #[test]
    fn rejects_unknown() {
        assert!("ate".parse::<ScenarioId>().is_err());
        assert!("highdim-ate-p3".parse::<ScenarioId>().is_err());
        assert!("misspec-foo-ate".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn one_spec_per_scenario() {
        assert_eq!(ScenarioId::ErCasesCe.spec().risk, RiskKind::CrossEntropy);
        assert_eq!(
            "null-psi-nde".parse::<ScenarioId>().unwrap().constraint(),
            ConstraintKind::Nde
        );
    }
}
