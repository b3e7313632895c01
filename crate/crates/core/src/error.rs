use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them so callers (the CLI in
/// particular) can map them onto coarse categories with [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    // --- data ---
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("cell at row {row}, column `{col}` is not a number: `{value}`")]
    NonNumericCell {
        row: usize,
        col: String,
        value: String,
    },
    #[error("role cardinality violated: {0}")]
    RoleCardinalityViolation(String),
    #[error("sensitive column `{col}` has non-binary value {value} at row {row}")]
    NonBinarySensitive { row: usize, col: String, value: f64 },
    #[error("column `{col}` must be binary but has value {value} at row {row}")]
    NonBinaryColumn { row: usize, col: String, value: f64 },
    #[error("columns have unequal lengths ({0})")]
    RaggedColumns(String),
    #[error("split would leave an empty side (n = {n}, train fraction = {fraction})")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no outcome column")]
    MissingOutcome,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    // --- configuration ---
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("constraint requires a mediator column but none was supplied")]
    MissingMediator,
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("at most two constraints with at most one inequality are supported (got {equalities} equalities, {inequalities} inequalities)")]
    UnsupportedConstraintCount {
        equalities: usize,
        inequalities: usize,
    },

    // --- learners ---
    #[error("design matrix is rank deficient (pivot {pivot:.3e} below tolerance)")]
    RankDeficient { pivot: f64 },
    #[error("IRLS did not converge within {0} iterations")]
    NonConvergence(usize),

    // --- paths ---
    #[error("nuisance `{0}` is required but missing")]
    MissingNuisance(&'static str),
    #[error(
        "sensitive group x = {x} has estimated probability {value:.3e}; propensity is degenerate"
    )]
    DegeneratePropensity { x: u8, value: f64 },
    #[error("value {value} outside the open unit interval")]
    DomainError { value: f64 },
    #[error("negative discriminant {value:.3e}")]
    NegativeDiscriminant { value: f64 },
    #[error("multiplier {lambda} outside the admissible interval ({lo}, {hi})")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },
    #[error("negative radicand {value:.3e} at row {row}")]
    NegativeRadicand { row: usize, value: f64 },
    #[error("weight function has mean square {0:.3e}; it is numerically zero")]
    ZeroWeight(f64),
    #[error("no root of the path equation lies in (0, 1)")]
    NoValidRoot,

    // --- solvers ---
    #[error("constraint changes sign nowhere on [{lo}, {hi}] (best residual {best:.3e})")]
    NoSignChange { lo: f64, hi: f64, best: f64 },
    #[error("constraint is not monotone in the multiplier on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },
    #[error("two-constraint search ended with objective {0:.3e} above 1e-3")]
    NoFeasiblePoint(f64),
    #[error("path derivative vanishes at evaluation point {point} (|D| = {value:.3e})")]
    StepSingularity { point: usize, value: f64 },

    // --- serialization ---
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used for exit codes and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Solver,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            MissingColumn(_)
            | NonNumericCell { .. }
            | RoleCardinalityViolation(_)
            | NonBinarySensitive { .. }
            | NonBinaryColumn { .. }
            | RaggedColumns(_)
            | EmptySplit { .. }
            | EmptyDataset
            | MissingOutcome
            | SchemaMismatch(_)
            | Io(_)
            | Csv(_)
            | Json(_) => ErrorCategory::Data,
            InvalidArgument(_)
            | MissingMediator
            | Unsupported(_)
            | UnsupportedConstraintCount { .. } => ErrorCategory::Config,
            _ => ErrorCategory::Solver,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
