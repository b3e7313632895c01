//! Command-line flags. Every flag can also come from the `--config` JSON
//! file; flags win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "fairpath",
    version,
    about = "Fit, audit and simulate fairness-constrained predictors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit nuisances, solve the multiplier and write the model JSON.
    Fit(Options),
    /// Evaluate a stored model on CSV rows and append a prediction column.
    Predict(Options),
    /// Plug-in constraint value for a prediction column or a stored model.
    Audit(Options),
    /// Run a Monte Carlo sweep over one scenario.
    Simulate(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintArg {
    Ate,
    Nde,
    ErCases,
    ErOverallMse,
    ErCasesControls,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskArg {
    Mse,
    Ce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerArg {
    Glm,
    Lasso,
}

/// `none` or a non-negative bound on the constraint magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    None,
    Abs(f64),
}

pub fn parse_bound(s: &str) -> Result<Bound, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Bound::None);
    }
    match s.parse::<f64>() {
        Ok(c) if c.is_finite() && c >= 0.0 => Ok(Bound::Abs(c)),
        _ => Err(format!(
            "expected `none` or a non-negative number, got `{s}`"
        )),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Input CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model JSON: written by `fit`, read by `predict` and `audit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output file (predictions CSV or simulation results CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintArg>,
    #[arg(long, value_enum)]
    pub risk: Option<RiskArg>,
    /// Bound `c` for `|constraint| <= c`, or `none` for equality.
    #[arg(long, value_parser = parse_bound)]
    pub bound: Option<Bound>,
    /// Weight for `--constraint weighted`: `ate-weight`, `nde-weight`,
    /// `contrast`, `constant:<c>` or `linear:<intercept>[,<column>=<coef>...]`.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Grid size for the multiplier search.
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub learner: Option<LearnerArg>,
    /// Cross-validation folds for the lasso learner.
    #[arg(long)]
    pub folds: Option<usize>,

    /// Sensitive attribute column (default `x`).
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Outcome column (default `y`).
    #[arg(long)]
    pub outcome: Option<String>,
    /// Mediator column (default `m` when present).
    #[arg(long)]
    pub mediator: Option<String>,
    /// Covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Prediction column: audited by `audit`, written by `predict`.
    #[arg(long)]
    pub prediction_column: Option<String>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Oracle sample size for `simulate`.
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Train/test split repetitions for `audit`.
    #[arg(long)]
    pub splits: Option<usize>,
    /// Training share of each `audit` split (default 0.5).
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Scenario name for `simulate`, e.g. `ate-mse`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Sample sizes for `simulate`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Replications per sample size for `simulate`.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Leave the timestamp out of written sidecars.
    #[arg(long)]
    pub no_timestamp: bool,
}
