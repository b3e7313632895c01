//! Simulation harness: known-law data generators, an oracle for true risk
//! and constraint values, and seeded Monte Carlo experiments.

mod dgp;
mod experiment;
mod oracle;
mod scenario;

pub use dgp::{
    dgp_binary, dgp_highdim, dgp_main, dgp_misspec, Dgp, MisspecVariant, OUTCOME_VARIANCE,
};
pub use experiment::{
    replication_seed, run_experiment, run_with_reference, write_results_csv, write_sidecar,
    ExperimentConfig, MonteCarloResult, Reference, Sidecar, CSV_HEADER,
};
pub use oracle::{oracle_evaluate, Oracle, OracleValues, DEFAULT_ORACLE_SIZE, MIN_ORACLE_SIZE};
pub use scenario::{Effect, ScenarioId};
