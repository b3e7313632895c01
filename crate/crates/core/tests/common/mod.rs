//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use fairpath_core::data::{Column, ColumnRole, Dataset};
use fairpath_core::nuisance::{fit_nuisances, NuisanceConfig, NuisanceSet};
use fairpath_core::problem::{ConstraintKind, RiskKind};
use fairpath_core::sim::{dgp_binary, dgp_main};

pub fn fit(data: &Dataset, constraint: ConstraintKind, risk: RiskKind) -> Arc<NuisanceSet> {
    Arc::new(fit_nuisances(data, &NuisanceConfig::new(constraint, risk)).expect("fit"))
}

/// Main process with the outcome dichotomized at zero, so cross-entropy
/// paths with a mediator can be exercised.
pub fn main_binary(n: usize, seed: u64) -> Dataset {
    let d = dgp_main(n, seed);
    let columns = d
        .columns()
        .iter()
        .map(|c| {
            if c.role == ColumnRole::Outcome {
                Column::new(
                    c.name.clone(),
                    c.role,
                    c.values.iter().map(|&y| f64::from(y > 0.0)).collect(),
                )
            } else {
                c.clone()
            }
        })
        .collect();
    Dataset::new(columns).unwrap()
}

pub struct Fixtures {
    pub main: Dataset,
    pub binary: Dataset,
    pub main_binary: Dataset,
}

impl Fixtures {
    pub fn new(n: usize) -> Self {
        Self {
            main: dgp_main(n, 101),
            binary: dgp_binary(n, 202),
            main_binary: main_binary(n, 303),
        }
    }

    /// Data and fitted nuisances for a (constraint, risk) pair.
    pub fn case(&self, constraint: ConstraintKind, risk: RiskKind) -> (&Dataset, Arc<NuisanceSet>) {
        let data = match (constraint, risk) {
            (
                ConstraintKind::EqualizedRiskCases | ConstraintKind::EqualizedRiskCasesAndControls,
                _,
            ) => &self.binary,
            (_, RiskKind::CrossEntropy) => &self.main_binary,
            _ => &self.main,
        };
        (data, fit(data, constraint, risk))
    }
}
