//! Monte Carlo replications: generate, fit, solve, evaluate.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{Oracle, DEFAULT_ORACLE_SIZE};
use super::scenario::ScenarioId;
use crate::error::{Error, Result};
use crate::nuisance::fit_nuisances;
use crate::paths::FairPredictor;
use crate::problem::ConstraintSpec;
use crate::rng::{derive_key, fnv1a};
use crate::solver::{path_at, solve};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioId,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub spec: ConstraintSpec,
    pub base_seed: u64,
    pub n_oracle: usize,
}

impl ExperimentConfig {
    /// The scenario's equality spec with the default oracle size.
    pub fn new(
        scenario: ScenarioId,
        sample_sizes: Vec<usize>,
        reps: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            scenario,
            sample_sizes,
            reps,
            spec: scenario.spec(),
            base_seed,
            n_oracle: DEFAULT_ORACLE_SIZE,
        }
    }

    pub fn with_spec(mut self, spec: ConstraintSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn with_oracle_size(mut self, n_oracle: usize) -> Self {
        self.n_oracle = n_oracle;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument(
                "at least one replication is required".into(),
            ));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "sample sizes must be positive".into(),
            ));
        }
        if self.spec.constraint != self.scenario.constraint()
            || self.spec.risk != self.scenario.risk()
        {
            return Err(Error::InvalidArgument(format!(
                "spec ({:?}, {:?}) does not match scenario {}",
                self.spec.constraint, self.spec.risk, self.scenario
            )));
        }
        self.spec.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub scenario: ScenarioId,
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub lambda: Vec<f64>,
    pub true_risk: f64,
    pub optimal_risk: f64,
    pub true_constraint: f64,
    pub unconstrained_constraint: f64,
    /// `ok`, or the failure of this replication.
    pub status: String,
}

impl MonteCarloResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Seed of one replication.
pub fn replication_seed(base_seed: u64, scenario: ScenarioId, n: usize, replication: usize) -> u64 {
    let k = derive_key(base_seed, fnv1a(scenario.name().as_bytes()));
    derive_key(derive_key(k, n as u64), replication as u64)
}

fn oracle_seed(base_seed: u64, scenario: ScenarioId) -> u64 {
    derive_key(
        derive_key(base_seed, fnv1a(scenario.name().as_bytes())),
        fnv1a(b"oracle"),
    )
}

/// Population reference values shared by every replication.
#[derive(Debug, Clone)]
pub struct Reference {
    pub oracle: Oracle,
    pub optimal: FairPredictor,
    pub optimal_risk: f64,
    pub unconstrained_constraint: f64,
}

impl Reference {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let oracle = Oracle::new(
            config.scenario,
            config.n_oracle,
            oracle_seed(config.base_seed, config.scenario),
        )?;
        let optimal = oracle.optimal(&config.spec)?;
        let optimal_risk = oracle.evaluate(&optimal)?.risk;
        let unconstrained_constraint =
            oracle.constraint(&path_at(&config.spec, oracle.truth(), 0.0)?)?;
        Ok(Self {
            oracle,
            optimal,
            optimal_risk,
            unconstrained_constraint,
        })
    }
}

fn replicate(
    config: &ExperimentConfig,
    reference: &Reference,
    n: usize,
    rep: usize,
) -> MonteCarloResult {
    let seed = replication_seed(config.base_seed, config.scenario, n, rep);
    let mut out = MonteCarloResult {
        scenario: config.scenario,
        n,
        replication: rep,
        seed,
        lambda: Vec::new(),
        true_risk: f64::NAN,
        optimal_risk: reference.optimal_risk,
        true_constraint: f64::NAN,
        unconstrained_constraint: reference.unconstrained_constraint,
        status: "ok".into(),
    };
    let run = || -> Result<(Vec<f64>, f64, f64)> {
        let data = config.scenario.dgp().sample(n, seed);
        let eta = Arc::new(fit_nuisances(
            &data,
            &config.scenario.nuisance_config(seed),
        )?);
        let (predictor, result) = solve(&config.spec, &eta, &data)?;
        let values = reference.oracle.evaluate(&predictor)?;
        Ok((result.lambda, values.risk, values.constraint))
    };
    match run() {
        Ok((lambda, risk, constraint)) => {
            out.lambda = lambda;
            out.true_risk = risk;
            out.true_constraint = constraint;
        }
        Err(e) => out.status = format!("{:?}: {e}", e.category()).to_lowercase(),
    }
    out
}

/// Run every `(n, replication)` pair; failures are recorded per row.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MonteCarloResult>> {
    config.validate()?;
    let reference = Reference::new(config)?;
    run_with_reference(config, &reference)
}

/// [`run_experiment`] with a precomputed reference.
pub fn run_with_reference(
    config: &ExperimentConfig,
    reference: &Reference,
) -> Result<Vec<MonteCarloResult>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |r| (n, r)))
        .collect();
    let mut results: Vec<MonteCarloResult> = jobs
        .into_par_iter()
        .map(|(n, r)| replicate(config, reference, n, r))
        .collect();
    results.sort_by_key(|r| (r.n, r.replication));
    Ok(results)
}

pub const CSV_HEADER: [&str; 10] = [
    "scenario",
    "n",
    "replication",
    "seed",
    "lambda",
    "true_risk",
    "optimal_risk",
    "true_constraint",
    "unconstrained_constraint",
    "status",
];

pub fn write_results_csv<W: Write>(out: W, results: &[MonteCarloResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        let lambda = r
            .lambda
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.scenario.name(),
            r.n.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            lambda,
            r.true_risk.to_string(),
            r.optimal_risk.to_string(),
            r.true_constraint.to_string(),
            r.unconstrained_constraint.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Configuration record written next to the results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub version: String,
    pub records: usize,
    pub failures: usize,
}

pub fn write_sidecar<W: Write>(
    out: W,
    config: &ExperimentConfig,
    results: &[MonteCarloResult],
) -> Result<()> {
    let sidecar = Sidecar {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        records: results.len(),
        failures: results.iter().filter(|r| !r.is_ok()).count(),
    };
    serde_json::to_writer_pretty(out, &sidecar)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_every_coordinate() {
        let s = replication_seed(1, ScenarioId::AteMse, 100, 0);
        assert_ne!(s, replication_seed(2, ScenarioId::AteMse, 100, 0));
        assert_ne!(s, replication_seed(1, ScenarioId::NdeMse, 100, 0));
        assert_ne!(s, replication_seed(1, ScenarioId::AteMse, 200, 0));
        assert_ne!(s, replication_seed(1, ScenarioId::AteMse, 100, 1));
    }

    #[test]
    fn smoke_run_is_sorted_and_deterministic() {
        let config = ExperimentConfig::new(ScenarioId::AteMse, vec![200, 100], 3, 7)
            .with_oracle_size(10_000);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.len(), 6);
        assert!(a
            .windows(2)
            .all(|p| (p[0].n, p[0].replication) <= (p[1].n, p[1].replication)));
        assert!(a.iter().all(|r| r.is_ok()), "{a:?}");
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,n,replication,seed,lambda,true_risk"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let config = ExperimentConfig::new(ScenarioId::AteMse, vec![100], 1, 0)
            .with_spec(ScenarioId::NdeMse.spec());
        assert!(matches!(
            run_experiment(&config),
            Err(Error::InvalidArgument(_))
        ));
    }
}
