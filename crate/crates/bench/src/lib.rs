//! Shared fixtures for the benchmarks: a sampled dataset with its fitted
//! nuisances for one constraint.

use std::sync::Arc;

pub use fairpath_core;
use fairpath_core::{fit_nuisances, ConstraintSpec, Dataset, NuisanceConfig, NuisanceSet};

pub struct Fixture {
    pub spec: ConstraintSpec,
    pub data: Dataset,
    pub eta: Arc<NuisanceSet>,
}

impl Fixture {
    pub fn new(spec: ConstraintSpec, data: Dataset) -> Self {
        let config = NuisanceConfig::new(spec.constraint, spec.risk);
        let eta = Arc::new(fit_nuisances(&data, &config).expect("fixture nuisances"));
        Self { spec, data, eta }
    }
}
